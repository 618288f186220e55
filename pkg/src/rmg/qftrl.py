"""Robust Q-FTRL against a generative model.

For each step ``h = H-1, ..., 0`` the solver runs ``K`` rounds.  In a round
every agent ``i`` queries the simulator once per ``(s, a_i)``: the other
agents' actions are drawn from their current FTRL policies, the reward is
looked up, and one next state is drawn from the nominal kernel.  The sampled
robust target updates a per-agent Q table, whose softmax gives the next
round's policy.  After ``K`` rounds an optimistic, clipped value estimate is
formed and the solver moves one step back.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .game import RobustMarkovGame, effective_horizon, validate
from .policies import (MixturePolicy, ProductMarkovPolicy, Schedules, average_agent_policy,
                       build_schedules, ftrl_update)
from .rng import RandomStream, inverse_cdf

__all__ = [
    "AlgoConfig",
    "RunOutput",
    "SampleBudgetError",
    "TRANSITION_TAG",
    "opponent_tag",
    "theory_c_b",
    "bonus_beta",
    "value_estimate",
    "value_range_bound",
    "zero_sum_product_output",
    "run_robust_qftrl",
]

log = logging.getLogger(__name__)

TRANSITION_TAG = 0


def opponent_tag(j: int) -> int:
    return 1 + j


def theory_c_b(c_alpha: float) -> float:
    return 2.0 * math.sqrt(c_alpha + 1.0)


class SampleBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class AlgoConfig:
    K: int
    c_alpha: float = 24.0
    c_b: float = 0.5
    delta: float = 0.01
    seed: int = 0
    record_trace: bool = False
    sample_cap: int = 10**9
    trace_cap: int = 10**7
    workers: int = 1

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0,1), got {self.delta}")
        if self.c_b < 0:
            raise ValueError(f"c_b must be >= 0, got {self.c_b}")
        if self.c_alpha <= 0:
            raise ValueError(f"c_alpha must be > 0, got {self.c_alpha}")


@dataclass(eq=False)
class RunOutput:
    mixture: MixturePolicy
    values: np.ndarray  # (m, H+1, S) optimistic estimates, last step zero
    q_tables: tuple[np.ndarray, ...]  # per agent (H, S, A_i), Q^K
    bonus: np.ndarray  # (m, H, S)
    sample_count: int
    schedules: Schedules
    zero_sum_products: Optional[ProductMarkovPolicy] = None
    violations: list[str] = field(default_factory=list)
    range_warnings: list[str] = field(default_factory=list)
    trace: Optional[dict] = None


def bonus_beta(variances, weights, c_b: float, delta: float, K: int, S: int, sum_A: int,
               eff_horizon: float) -> np.ndarray:
    """Optimism bonus from per-round action variances ``variances[k, ...]``."""
    if c_b == 0:
        return np.zeros(np.shape(variances)[1:])
    scale = c_b * math.sqrt(math.log(K * S * sum_A / delta) ** 3 / (K * eff_horizon))
    return scale * np.tensordot(weights, np.asarray(variances) + eff_horizon, axes=(0, 0))


def value_estimate(q_rows, policies, weights, beta, h: int, H: int) -> np.ndarray:
    """Clipped optimistic value at zero-based step ``h``.

    ``q_rows`` and ``policies`` are stacked per round as ``(K, S, A)``.
    """
    mean = np.tensordot(weights, np.sum(np.asarray(policies) * np.asarray(q_rows), axis=-1),
                        axes=(0, 0))
    return np.minimum(mean + beta, H - h)


def value_range_bound(H: int, h: int, R: float) -> float:
    """``3 * sum_{t=0}^{H-h-1} (1-R)^t`` for zero-based step ``h``."""
    return 3.0 * sum((1.0 - R) ** t for t in range(H - h))


def zero_sum_product_output(stage_policies, weights) -> ProductMarkovPolicy:
    """Average each agent's per-round policies; ``stage_policies[i]`` is ``(H, K, S, A_i)``."""
    if len(stage_policies) != 2:
        raise ValueError(f"zero-sum product output needs exactly 2 agents, got {len(stage_policies)}")
    weights = np.asarray(weights)
    return ProductMarkovPolicy(tuple(
        np.stack([average_agent_policy(comp[h], weights[h]) for h in range(comp.shape[0])])
        for comp in stage_policies))


class _Cells:
    """Flattened ``(i, s, a_i)`` query cells of one round."""

    def __init__(self, game: RobustMarkovGame):
        S, A = game.num_states, game.action_counts
        agent, state, action = [], [], []
        for i, a_count in enumerate(A):
            for s in range(S):
                for a in range(a_count):
                    agent.append(i)
                    state.append(s)
                    action.append(a)
        self.agent = np.array(agent, dtype=np.int64)
        self.state = np.array(state, dtype=np.int64)
        self.action = np.array(action, dtype=np.int64)
        self.offsets = np.cumsum([0] + [S * a for a in A])
        self.size = len(agent)

    def agent_slice(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i + 1])


def _sample_round(game, kernel_cdf, cells, idx, policies_cdf, stream, h, k, v_next, vmin):
    """Sampled robust targets ``q`` for the cells selected by ``idx``."""
    R = game.uncertainty_level
    agent, state, action = cells.agent[idx], cells.state[idx], cells.action[idx]
    cols = []
    for j in range(game.num_agents):
        u = stream.uniform(h, k, agent, state, action, opponent_tag(j))
        drawn = inverse_cdf(policies_cdf[j][state], u)
        cols.append(np.where(agent == j, action, drawn))
    joint = np.ravel_multi_index(tuple(cols), game.action_counts)
    reward = game.rewards[agent, h, state, joint]
    u = stream.uniform(h, k, agent, state, action, TRANSITION_TAG)
    nxt = inverse_cdf(kernel_cdf[h, state, joint], u)
    return reward + (1.0 - R) * v_next[agent, nxt] + R * vmin[agent], nxt


def run_robust_qftrl(game: RobustMarkovGame, config: AlgoConfig) -> RunOutput:
    validate(game)
    m, S, H, A = game.num_agents, game.num_states, game.horizon, game.action_counts
    R, K = game.uncertainty_level, config.K
    cells = _Cells(game)
    budget = K * H * cells.size
    if budget > config.sample_cap:
        raise SampleBudgetError(f"{budget} samples exceeds the cap {config.sample_cap}")

    sched = build_schedules(K, config.c_alpha, H, R)
    M = effective_horizon(game)
    stream = RandomStream(config.seed)
    kernel_cdf = np.cumsum(game.kernel, axis=-1)
    weights = np.tile(sched.alpha_K, (H, 1))

    V = np.zeros((m, H + 1, S))
    bonus = np.zeros((m, H, S))
    components = [np.empty((H, K, S, a)) for a in A]
    q_final = [np.empty((H, S, a)) for a in A]
    violations: list[str] = []
    range_warnings: list[str] = []
    keep_trace = config.record_trace and budget <= config.trace_cap
    trace = {"q": [], "Q": [], "next_state": []} if keep_trace else None
    if config.record_trace and not keep_trace:
        trace = {"thinned": True, "Q": []}

    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    chunks = np.array_split(np.arange(cells.size), max(1, config.workers))
    samples = 0
    try:
        for h in range(H - 1, -1, -1):
            v_next = V[:, h + 1]
            vmin = v_next.min(axis=1)
            Q = np.zeros(cells.size)
            policies = [np.full((S, a), 1.0 / a) for a in A]
            q_rounds = np.empty((K, cells.size))
            next_rounds = np.empty((K, cells.size), dtype=np.int64)
            for k in range(1, K + 1):
                for i in range(m):
                    components[i][h, k - 1] = policies[i]
                policies_cdf = [np.cumsum(p, axis=1) for p in policies]
                args = (game, kernel_cdf, cells)
                tail = (policies_cdf, stream, h, k, v_next, vmin)
                if pool is None:
                    q, nxt = _sample_round(*args, chunks[0], *tail)
                else:
                    parts = list(pool.map(lambda c: _sample_round(*args, c, *tail), chunks))
                    q = np.concatenate([p[0] for p in parts])
                    nxt = np.concatenate([p[1] for p in parts])
                samples += cells.size
                q_rounds[k - 1] = q
                next_rounds[k - 1] = nxt
                a_k = sched.alpha[k - 1]
                Q = (1.0 - a_k) * Q + a_k * q
                for i in range(m):
                    sl = cells.agent_slice(i)
                    policies[i] = ftrl_update(Q[sl].reshape(S, A[i]), sched.eta[k])
            for i in range(m):
                sl = cells.agent_slice(i)
                q_i = q_rounds[:, sl].reshape(K, S, A[i])
                pi_i = components[i][h]
                mean = np.sum(pi_i * q_i, axis=-1, keepdims=True)
                var = np.sum(pi_i * (q_i - mean) ** 2, axis=-1)
                bonus[i, h] = bonus_beta(var, sched.alpha_K, config.c_b, config.delta,
                                         K, S, sum(A), M)
                V[i, h] = value_estimate(q_i, pi_i, sched.alpha_K, bonus[i, h], h, H)
                q_final[i][h] = Q[sl].reshape(S, A[i])
            if trace is not None:
                trace["Q"].append(Q.copy())
                if keep_trace:
                    trace["q"].append(q_rounds)
                    trace["next_state"].append(next_rounds)
            violations += _check_step(V, h, H, components, S, A)
            bound = value_range_bound(H, h, R)
            for i in range(m):
                spread = float(V[i, h].max() - V[i, h].min())
                if spread > bound:
                    msg = f"value range {spread:.6g} > {bound:.6g} at agent {i}, step {h}"
                    log.warning(msg)
                    range_warnings.append(msg)
    finally:
        if pool is not None:
            pool.shutdown()

    if samples != budget:
        violations.append(f"sample count {samples} != {budget}")
    mixture = MixturePolicy(weights, tuple(components))
    if trace is not None:
        # steps were visited backwards; store in step order
        trace = {key: (val[::-1] if isinstance(val, list) else val) for key, val in trace.items()}
        trace["cells"] = {"agent": cells.agent, "state": cells.state, "action": cells.action}
    zs = zero_sum_product_output(components, weights) if game.is_zero_sum() else None
    return RunOutput(mixture=mixture, values=V, q_tables=tuple(q_final), bonus=bonus,
                     sample_count=samples, schedules=sched, zero_sum_products=zs,
                     violations=violations, range_warnings=range_warnings, trace=trace)


def _check_step(V, h, H, components, S, A) -> list[str]:
    out = []
    if np.any(V[:, h] < 0) or np.any(V[:, h] > H - h):
        out.append(f"value estimate outside [0, {H - h}] at step {h}")
    if np.any(V[:, h].min(axis=1) < V[:, h + 1].min(axis=1)):
        out.append(f"min value decreased from step {h + 1} to {h}")
    for i, comp in enumerate(components):
        rows = comp[h]
        if np.any(rows <= 0) or np.any(np.abs(rows.sum(-1) - 1.0) > 1e-12):
            out.append(f"agent {i} policy rows at step {h} not strictly positive and stochastic")
    return out
