"""Exact robust policy evaluation, best responses and equilibrium gaps."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .game import RobustMarkovGame, brute_force_robust_expectation, encode_joint
from .policies import MixturePolicy, ProductMarkovPolicy, joint_tensor

__all__ = [
    "GAP_TOL",
    "RobustValueProfile",
    "BestResponseResult",
    "GapReport",
    "robust_backup",
    "one_step_q",
    "robust_value_of_policy",
    "robust_best_response",
    "cce_gap",
    "ne_gap",
    "enumerate_deviations_oracle",
]

GAP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class RobustValueProfile:
    """``values[i, h, s]`` for ``h = 0..H`` with ``values[:, H] == 0``."""

    values: np.ndarray


@dataclass(frozen=True, eq=False)
class BestResponseResult:
    values: np.ndarray  # (H+1, S)
    actions: np.ndarray  # (H, S) greedy action indices
    num_actions: int

    @property
    def policy(self) -> np.ndarray:
        """Deterministic table ``(H, S, A_i)``."""
        return np.eye(self.num_actions)[self.actions]


@dataclass(frozen=True, eq=False)
class GapReport:
    """Equilibrium gaps at the first step.

    ``raw_gaps[i, s]`` is the signed best-response improvement.  A correlated
    policy can leave it negative (an agent's deviation cannot see the
    correlation device); ``gaps`` clamps at zero, so ``cce_gap`` is the
    smallest nonnegative epsilon for which the policy is an epsilon-CCE.
    """

    gaps: np.ndarray  # (m, S)
    cce_gap: float
    policy_values: np.ndarray  # (m, H+1, S)
    best_response_values: np.ndarray  # (m, H+1, S)
    raw_gaps: np.ndarray  # (m, S)
    ne_gap: Optional[float] = None

    @property
    def max_agent_gap(self) -> np.ndarray:
        return self.gaps.max(axis=1)

    def to_json(self) -> dict:
        doc = {
            "gaps": self.gaps.tolist(),
            "raw_gaps": self.raw_gaps.tolist(),
            "cce_gap": self.cce_gap,
            "max_agent_gap": self.max_agent_gap.tolist(),
            "policy_values": self.policy_values.tolist(),
            "best_response_values": self.best_response_values.tolist(),
        }
        if self.ne_gap is not None:
            doc["ne_gap"] = self.ne_gap
        return doc


def robust_backup(game: RobustMarkovGame, h: int, i: int, v_next: np.ndarray) -> np.ndarray:
    """``r_i + (1-R) P0 v + R min v`` for every ``(s, joint action)``; shape ``(S, J)``."""
    R = game.uncertainty_level
    return game.rewards[i, h] + (1.0 - R) * (game.kernel[h] @ v_next) + R * v_next.min()


def one_step_q(game: RobustMarkovGame, h: int, i: int, v_next, s: int, joint_action: int) -> float:
    """Robust Q value of a single ``(s, joint action)`` given the next-step value."""
    v_next = np.asarray(v_next, dtype=np.float64)
    R = game.uncertainty_level
    row = game.kernel[h, s, joint_action]
    return float(game.rewards[i, h, s, joint_action]
                 + (1.0 - R) * row @ v_next + R * v_next.min())


def _check_dims(game: RobustMarkovGame, policy) -> None:
    if (policy.num_agents != game.num_agents or policy.horizon != game.horizon
            or policy.num_states != game.num_states
            or policy.action_counts != game.action_counts):
        raise ValueError(
            f"policy dimensions (m={policy.num_agents}, H={policy.horizon}, S={policy.num_states}, "
            f"A={policy.action_counts}) do not match the game")


def robust_value_of_policy(game: RobustMarkovGame, policy) -> RobustValueProfile:
    _check_dims(game, policy)
    H, S, m = game.horizon, game.num_states, game.num_agents
    joint = joint_tensor(policy).reshape(H, S, -1)
    V = np.zeros((m, H + 1, S))
    for h in range(H - 1, -1, -1):
        for i in range(m):
            V[i, h] = np.sum(joint[h] * robust_backup(game, h, i, V[i, h + 1]), axis=1)
    return RobustValueProfile(V)


def _others_marginal(joint_h: np.ndarray, i: int) -> np.ndarray:
    """Sum the joint ``(S, A_0..A_{m-1})`` over agent ``i``, keeping a singleton axis."""
    return joint_h.sum(axis=1 + i, keepdims=True)


def robust_best_response(game: RobustMarkovGame, policy, i: int) -> BestResponseResult:
    _check_dims(game, policy)
    H, S = game.horizon, game.num_states
    joint = joint_tensor(policy)
    shape = (S,) + game.action_counts
    axes = tuple(ax for ax in range(1, len(shape)) if ax != 1 + i)
    V = np.zeros((H + 1, S))
    actions = np.zeros((H, S), dtype=np.int64)
    for h in range(H - 1, -1, -1):
        backup = robust_backup(game, h, i, V[h + 1]).reshape(shape)
        q = np.sum(backup * _others_marginal(joint[h], i), axis=axes)  # (S, A_i)
        actions[h] = np.argmax(q, axis=1)
        V[h] = q[np.arange(S), actions[h]]
    return BestResponseResult(V, actions, game.action_counts[i])


def _is_product(policy) -> bool:
    return isinstance(policy, ProductMarkovPolicy) or policy.num_components == 1


def _gap_report(game: RobustMarkovGame, policy) -> GapReport:
    values = robust_value_of_policy(game, policy).values
    br = np.stack([robust_best_response(game, policy, i).values for i in range(game.num_agents)])
    raw = br[:, 0] - values[:, 0]
    if _is_product(policy) and np.any(raw < -GAP_TOL):
        # against an independent profile the best response always dominates
        i, s = np.argwhere(raw < -GAP_TOL)[0]
        raise RuntimeError(f"best response below policy value for agent {i} at state {s}: {raw[i, s]!r}")
    gaps = np.maximum(raw, 0.0)
    return GapReport(gaps=gaps, cce_gap=float(gaps.max()), policy_values=values,
                     best_response_values=br, raw_gaps=raw)


def cce_gap(game: RobustMarkovGame, mixture) -> GapReport:
    """Per-agent, per-state robust CCE gaps of a (possibly correlated) policy."""
    return _gap_report(game, mixture)


def ne_gap(game: RobustMarkovGame, product: ProductMarkovPolicy) -> GapReport:
    if not _is_product(product):
        raise ValueError("NE gap needs a product policy")
    report = _gap_report(game, product)
    return GapReport(report.gaps, report.cce_gap, report.policy_values,
                     report.best_response_values, report.raw_gaps, ne_gap=report.cce_gap)


def _oracle_value(game, stage, i):
    """Robust value of agent ``i`` under per-step flat joint distributions ``stage[h][s][j]``.

    Written with explicit loops and vertex enumeration so that it shares no
    code path with :func:`robust_value_of_policy`.
    """
    H, S, R = game.horizon, game.num_states, game.uncertainty_level
    J = game.num_joint_actions
    v = [0.0] * S
    for h in range(H - 1, -1, -1):
        new = []
        for s in range(S):
            total = 0.0
            for j in range(J):
                w = stage[h][s][j]
                if w == 0.0:
                    continue
                cont = brute_force_robust_expectation(game.kernel[h, s, j], v, R)
                total += w * (game.rewards[i, h, s, j] + cont)
            new.append(total)
        v = new
    return np.array(v)


def enumerate_deviations_oracle(game: RobustMarkovGame, policy, i: int,
                                max_policies: int = 10**6) -> np.ndarray:
    """Best value at ``h = 0`` over every deterministic Markov deviation of agent ``i``.

    Exponential in ``S * H``; meant for tiny test instances only.
    """
    _check_dims(game, policy)
    H, S, A = game.horizon, game.num_states, game.action_counts
    count = A[i] ** (S * H)
    if count > max_policies:
        raise ValueError(f"{count} deterministic policies exceeds the oracle limit {max_policies}")
    mix = policy.as_mixture() if isinstance(policy, ProductMarkovPolicy) else policy
    rest = [j for j in range(len(A)) if j != i]
    others = list(itertools.product(*[range(A[j]) for j in rest]))
    # marginal of the other agents, summed component by component
    marg = [[{} for _ in range(S)] for _ in range(H)]
    for h in range(H):
        for s in range(S):
            for sub in others:
                total = 0.0
                for k in range(mix.num_components):
                    term = float(mix.weights[h, k])
                    for j, a in zip(rest, sub):
                        term *= float(mix.components[j][h, k, s, a])
                    total += term
                marg[h][s][sub] = total
    best = np.full(S, -math.inf)
    J = game.num_joint_actions
    for choice in itertools.product(range(A[i]), repeat=S * H):
        stage = [[[0.0] * J for _ in range(S)] for _ in range(H)]
        for h in range(H):
            for s in range(S):
                ai = choice[h * S + s]
                for sub in others:
                    full = sub[:i] + (ai,) + sub[i:]
                    stage[h][s][int(encode_joint(full, A))] += marg[h][s][sub]
        best = np.maximum(best, _oracle_value(game, stage, i))
    return best
