"""Two-state hard instances for the sample-complexity lower bound.

The family is indexed by a bit vector ``theta`` of length ``H``: at state 0
the action ``theta[h]`` moves to the rewarding state 1 with probability ``p``
and the other action with ``q = p - gap``.  Every member shares the same
optimal robust value, which has a closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .game import RobustMarkovGame, effective_horizon, validate
from .policies import ProductMarkovPolicy
from .rng import RandomStream

__all__ = [
    "HardInstanceParams",
    "hard_rmdp",
    "closed_form_optimal_value",
    "closed_form_table",
    "gilbert_varshamov_pack",
    "hamming_threshold",
    "optimal_theta_policy",
]


@dataclass(frozen=True)
class HardInstanceParams:
    H: int
    R: float
    epsilon: float
    c: float = 0.75
    c1: float = 1.0
    c_R: float = 0.9
    p: float = field(init=False)
    q: float = field(init=False)
    delta_gap: float = field(init=False)
    p_tilde: float = field(init=False)

    def __post_init__(self):
        if self.H < 1:
            raise ValueError(f"horizon must be >= 1, got {self.H}")
        if not (0.0 <= self.R < self.c_R < 1.0):
            raise ValueError(f"need 0 <= R < c_R < 1, got R={self.R}, c_R={self.c_R}")
        if not (0.0 < self.c <= 0.75):
            raise ValueError(f"c must lie in (0, 3/4], got {self.c}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        p = self.c * max(1.0 / self.H, self.R)
        delta_gap = self.c1 * self.epsilon / (self.H * effective_horizon(self.H, self.R))
        q = p - delta_gap
        if not (0.0 < q < p < 0.75):
            raise ValueError(f"need 0 < q < p < 3/4, got p={p!r}, q={q!r}; reduce epsilon or c1")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "delta_gap", delta_gap)
        object.__setattr__(self, "p_tilde", (1.0 - self.R) * p)

    @property
    def is_well_separated(self) -> bool:
        """Whether ``q >= p / 2``, the separation the lower-bound argument relies on."""
        return self.q >= self.p / 2


def hard_rmdp(params: HardInstanceParams, theta) -> RobustMarkovGame:
    theta = np.asarray(theta, dtype=np.int64)
    if theta.shape != (params.H,) or np.any((theta != 0) & (theta != 1)):
        raise ValueError(f"theta must be a 0/1 vector of length {params.H}")
    H = params.H
    kernel = np.zeros((H, 2, 2, 2))
    for h in range(H):
        good = theta[h]
        kernel[h, 0, good] = [1.0 - params.p, params.p]
        kernel[h, 0, 1 - good] = [1.0 - params.q, params.q]
        kernel[h, 1, :, 1] = 1.0
    rewards = np.zeros((1, H, 2, 2))
    rewards[0, :, 1, :] = 1.0
    game = RobustMarkovGame(1, 2, (2,), H, kernel, rewards, params.R)
    validate(game)
    return game


def closed_form_optimal_value(params: HardInstanceParams, h: int) -> tuple[float, float]:
    """Optimal robust values ``(V(0), V(1))`` at zero-based step ``h`` in ``0..H``."""
    if not (0 <= h <= params.H):
        raise ValueError(f"step {h} outside 0..{params.H}")
    R, pt = params.R, params.p_tilde
    rate = R + pt
    if rate <= 0:
        raise ValueError("R + p_tilde must be positive")
    n = params.H - h
    if n == 0:
        return 0.0, 0.0
    geo = (1.0 - (1.0 - rate) ** n) / rate
    v0 = pt / rate * (n - geo)
    v1 = (pt * n + R * geo) / rate
    return v0, v1


def closed_form_table(params: HardInstanceParams) -> np.ndarray:
    """``(H+1, 2)`` table of closed-form optimal values."""
    return np.array([closed_form_optimal_value(params, h) for h in range(params.H + 1)])


def hamming_threshold(H: int) -> int:
    return math.ceil(H / 8)


def gilbert_varshamov_pack(H: int, max_attempts: int, stream: RandomStream) -> list[np.ndarray]:
    """Greedy random packing of ``{0,1}^H`` with pairwise distance ``>= ceil(H/8)``.

    Maximal with respect to the candidates drawn; the size is not certified.
    """
    if H < 8:
        raise ValueError(f"packing needs H >= 8, got {H}")
    need = hamming_threshold(H)
    kept: list[np.ndarray] = []
    for attempt in range(max_attempts):
        cand = (stream.uniform(attempt, np.arange(H)) < 0.5).astype(np.int64)
        if all(int(np.sum(cand != other)) >= need for other in kept):
            kept.append(cand)
    return kept


def optimal_theta_policy(theta) -> ProductMarkovPolicy:
    theta = np.asarray(theta, dtype=np.int64)
    table = np.zeros((len(theta), 2, 2))
    table[np.arange(len(theta)), 0, theta] = 1.0
    table[:, 1, 0] = 1.0
    return ProductMarkovPolicy((table,))
