"""Tabular robust Markov games under R-contamination.

Indices are zero-based throughout: step ``h`` runs over ``0..H-1`` and the
terminal value lives at ``h = H``.  A joint action is stored as one flat index
in mixed radix with agent 0 as the most significant digit, which coincides with
numpy's C-order ``ravel_multi_index`` over ``action_counts``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import RandomStream, inverse_cdf

__all__ = [
    "MAX_JOINT_ACTIONS",
    "GameValidationError",
    "RobustMarkovGame",
    "SampleDraw",
    "validate",
    "effective_horizon",
    "encode_joint",
    "decode_joint",
    "robust_expectation",
    "worst_case_kernel_row",
    "brute_force_robust_expectation",
    "sample_next_state",
    "draw_sample",
    "game_to_json",
    "game_from_json",
    "save_game",
    "load_game",
]

MAX_JOINT_ACTIONS = 10**6
ROW_TOL = 1e-12


class GameValidationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RobustMarkovGame:
    """Nominal model plus uncertainty level.

    ``kernel`` has shape ``(H, S, J, S)`` and ``rewards`` shape ``(m, H, S, J)``
    with ``J = prod(action_counts)``.  Arrays are frozen read-only on
    construction; call :func:`validate` before use.
    """

    num_agents: int
    num_states: int
    action_counts: tuple[int, ...]
    horizon: int
    kernel: np.ndarray
    rewards: np.ndarray
    uncertainty_level: float

    def __post_init__(self):
        object.__setattr__(self, "action_counts", tuple(int(a) for a in self.action_counts))
        object.__setattr__(self, "uncertainty_level", float(self.uncertainty_level))
        for name in ("kernel", "rewards"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def num_joint_actions(self) -> int:
        return math.prod(self.action_counts)

    @property
    def R(self) -> float:
        return self.uncertainty_level

    def with_uncertainty(self, R: float) -> "RobustMarkovGame":
        return RobustMarkovGame(self.num_agents, self.num_states, self.action_counts,
                                self.horizon, self.kernel, self.rewards, R)

    def joint_shape(self) -> tuple[int, ...]:
        return self.action_counts

    def is_zero_sum(self, tol: float = 1e-12) -> bool:
        """Two players whose rewards satisfy ``r_0 + r_1 = 1`` (zero-sum in [0,1] encoding)."""
        if self.num_agents != 2:
            return False
        return bool(np.all(np.abs(self.rewards[0] + self.rewards[1] - 1.0) <= tol))


@dataclass(frozen=True)
class SampleDraw:
    joint_action: int
    reward: float
    next_state: int


def validate(game: RobustMarkovGame) -> None:
    m, S, H = game.num_agents, game.num_states, game.horizon
    if m < 1 or S < 1 or H < 1:
        raise GameValidationError(f"need num_agents, num_states, horizon >= 1, got {m}, {S}, {H}")
    if len(game.action_counts) != m or min(game.action_counts) < 1:
        raise GameValidationError(f"action_counts {game.action_counts} must list {m} positive counts")
    J = game.num_joint_actions
    if J > MAX_JOINT_ACTIONS:
        raise GameValidationError(f"{J} joint actions exceeds dense-storage cap {MAX_JOINT_ACTIONS}")
    if game.kernel.shape != (H, S, J, S):
        raise GameValidationError(f"kernel shape {game.kernel.shape} != {(H, S, J, S)}")
    if game.rewards.shape != (m, H, S, J):
        raise GameValidationError(f"rewards shape {game.rewards.shape} != {(m, H, S, J)}")
    R = game.uncertainty_level
    if not (0.0 <= R < 1.0):
        raise GameValidationError(f"uncertainty level must be in [0,1), got {R}")
    if not np.all(np.isfinite(game.kernel)) or np.any(game.kernel < 0):
        h, s, j, _ = np.argwhere(~(game.kernel >= 0))[0]
        raise GameValidationError(f"negative or non-finite kernel entry at (h={h}, s={s}, j={j})")
    sums = game.kernel.sum(axis=-1)
    bad = np.abs(sums - 1.0) > ROW_TOL
    if np.any(bad):
        h, s, j = np.argwhere(bad)[0]
        raise GameValidationError(
            f"kernel row (h={h}, s={s}, j={j}) sums to {sums[h, s, j]!r}, not 1")
    if not np.all((game.rewards >= 0) & (game.rewards <= 1)):
        i, h, s, j = np.argwhere(~((game.rewards >= 0) & (game.rewards <= 1)))[0]
        raise GameValidationError(
            f"reward {game.rewards[i, h, s, j]!r} at (i={i}, h={h}, s={s}, j={j}) outside [0,1]")


def effective_horizon(game_or_H, R: float | None = None) -> float:
    """``min{H, 1/R}``, with ``1/0`` read as infinity."""
    if R is None:
        H, R = game_or_H.horizon, game_or_H.uncertainty_level
    else:
        H = game_or_H
    if R <= 0.0:
        return float(H)
    return min(float(H), 1.0 / R)


def encode_joint(actions, action_counts) -> int | np.ndarray:
    return np.ravel_multi_index(tuple(np.asarray(a) for a in actions), tuple(action_counts))


def decode_joint(j, action_counts) -> tuple:
    return np.unravel_index(j, tuple(action_counts))


def robust_expectation(p, v, R: float) -> float:
    """Worst-case mean of ``v`` over the contamination ball ``(1-R) p + R q``."""
    v = np.asarray(v, dtype=np.float64)
    return (1.0 - R) * float(np.dot(p, v)) + R * float(v.min())


def worst_case_kernel_row(p, v, R: float) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    row = (1.0 - R) * np.asarray(p, dtype=np.float64)
    row[int(np.argmin(v))] += R  # argmin returns the lowest index on ties
    return row


def brute_force_robust_expectation(p, v, R: float) -> float:
    """Minimum of ``<P, v>`` over the vertices ``(1-R) p + R e_s`` of the contamination set."""
    p = np.asarray(p, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    best = math.inf
    for s in range(len(v)):
        vertex = (1.0 - R) * p
        vertex[s] += R
        best = min(best, float(sum(vertex[t] * v[t] for t in range(len(v)))))
    return best


def sample_next_state(game: RobustMarkovGame, stream: RandomStream, h: int, s: int,
                      joint_action: int) -> int:
    cdf = np.cumsum(game.kernel[h, s, joint_action])
    return int(inverse_cdf(cdf, stream.uniform()))


def draw_sample(game: RobustMarkovGame, stream: RandomStream, i: int, h: int, s: int,
                actions) -> SampleDraw:
    """One generative-model query: deterministic reward lookup plus a next-state draw."""
    j = int(encode_joint(actions, game.action_counts))
    return SampleDraw(j, float(game.rewards[i, h, s, j]),
                      sample_next_state(game, stream, h, s, j))


def game_to_json(game: RobustMarkovGame) -> dict:
    return {
        "num_agents": game.num_agents,
        "num_states": game.num_states,
        "action_counts": list(game.action_counts),
        "horizon": game.horizon,
        "uncertainty_level": game.uncertainty_level,
        "kernel": game.kernel.tolist(),
        "rewards": game.rewards.tolist(),
    }


def game_from_json(doc: dict) -> RobustMarkovGame:
    try:
        game = RobustMarkovGame(
            num_agents=int(doc["num_agents"]),
            num_states=int(doc["num_states"]),
            action_counts=tuple(doc["action_counts"]),
            horizon=int(doc["horizon"]),
            kernel=np.asarray(doc["kernel"], dtype=np.float64),
            rewards=np.asarray(doc["rewards"], dtype=np.float64),
            uncertainty_level=float(doc["uncertainty_level"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GameValidationError(f"malformed game document: {exc}") from exc
    validate(game)
    return game


def save_game(game: RobustMarkovGame, path) -> None:
    Path(path).write_text(json.dumps(game_to_json(game)))


def load_game(path) -> RobustMarkovGame:
    return game_from_json(json.loads(Path(path).read_text()))
