"""Step-size schedules, FTRL updates and policy containers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .game import effective_horizon

__all__ = [
    "Schedules",
    "build_schedules",
    "ftrl_update",
    "MixturePolicy",
    "ProductMarkovPolicy",
    "joint_action_distribution",
    "marginal_excluding",
    "average_agent_policy",
    "joint_tensor",
    "policy_to_json",
    "policy_from_json",
    "save_policy",
    "load_policy",
]


@dataclass(frozen=True, eq=False)
class Schedules:
    """Learning rates for ``K`` rounds.

    ``alpha[k-1]`` is the Q-learning rate of round ``k``; ``eta[k-1]`` is the
    FTRL rate used to form the policy of round ``k`` (``k = 1..K+1``), and
    ``alpha_K`` holds the output mixture weights.
    """

    K: int
    c_alpha: float
    alpha: np.ndarray
    eta: np.ndarray
    alpha_K: np.ndarray


def _alpha(k: np.ndarray, K: int, c_alpha: float) -> np.ndarray:
    c_log = c_alpha * math.log(K)
    out = np.empty(k.shape, dtype=np.float64)
    first = k == 1
    out[first] = 1.0
    out[~first] = c_log / (k[~first] - 1 + c_log)
    return out


def build_schedules(K: int, c_alpha: float = 24.0, H: int = 1, R: float = 0.0) -> Schedules:
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if c_alpha <= 0:
        raise ValueError(f"c_alpha must be positive, got {c_alpha}")
    k = np.arange(1, K + 2)
    alpha_ext = _alpha(k, K, c_alpha)
    if K == 1:
        # log 1 = 0 zeroes the formula; a single round never uses its successor policy
        eta = np.ones(K + 1)
    else:
        eta = np.sqrt(math.log(K) / (alpha_ext * effective_horizon(H, R)))
    alpha = alpha_ext[:K]
    # alpha_k^K = alpha_k * prod_{j>k} (1 - alpha_j), accumulated from the back
    tail = np.ones(K)
    for idx in range(K - 2, -1, -1):
        tail[idx] = tail[idx + 1] * (1.0 - alpha[idx + 1])
    return Schedules(K=K, c_alpha=float(c_alpha), alpha=alpha, eta=eta, alpha_K=alpha * tail)


def ftrl_update(q_row, eta: float) -> np.ndarray:
    """Softmax of ``eta * q_row`` over the last axis."""
    z = eta * np.asarray(q_row, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class MixturePolicy:
    """Per-step weighted mixture of product policies.

    ``weights`` has shape ``(H, K)``; ``components[i]`` has shape
    ``(H, K, S, A_i)`` and holds agent ``i``'s table for each component.
    """

    weights: np.ndarray
    components: tuple[np.ndarray, ...]

    @property
    def horizon(self) -> int:
        return self.weights.shape[0]

    @property
    def num_components(self) -> int:
        return self.weights.shape[1]

    @property
    def num_agents(self) -> int:
        return len(self.components)

    @property
    def num_states(self) -> int:
        return self.components[0].shape[2]

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(c.shape[-1] for c in self.components)

    def check(self, tol: float = 1e-12) -> None:
        if np.any(np.abs(self.weights.sum(axis=1) - 1.0) > tol) or np.any(self.weights < 0):
            raise ValueError("mixture weights must be nonnegative and sum to 1 per step")
        for i, c in enumerate(self.components):
            if c.shape[:2] != self.weights.shape or np.any(c < 0) or np.any(np.abs(c.sum(-1) - 1.0) > tol):
                raise ValueError(f"agent {i} component tables are not stochastic")


@dataclass(frozen=True, eq=False)
class ProductMarkovPolicy:
    """Independent Markov policy: ``tables[i]`` has shape ``(H, S, A_i)``."""

    tables: tuple[np.ndarray, ...]

    @property
    def horizon(self) -> int:
        return self.tables[0].shape[0]

    @property
    def num_agents(self) -> int:
        return len(self.tables)

    @property
    def num_states(self) -> int:
        return self.tables[0].shape[1]

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(t.shape[-1] for t in self.tables)

    def as_mixture(self) -> MixturePolicy:
        return MixturePolicy(np.ones((self.horizon, 1)), tuple(t[:, None] for t in self.tables))

    def check(self, tol: float = 1e-12) -> None:
        for i, t in enumerate(self.tables):
            if np.any(t < 0) or np.any(np.abs(t.sum(-1) - 1.0) > tol):
                raise ValueError(f"agent {i} policy table is not stochastic")


def _as_mixture(policy) -> MixturePolicy:
    return policy.as_mixture() if isinstance(policy, ProductMarkovPolicy) else policy


def _stage_joint(weights: np.ndarray, tables: Sequence[np.ndarray]) -> np.ndarray:
    """Sum over components of the outer product of agent tables; ``tables[i]`` is ``(K, S, A_i)``."""
    acc = weights[:, None] * np.ones(tables[0].shape[:2])
    for t in tables:
        acc = acc[..., None] * t.reshape(t.shape[:2] + (1,) * (acc.ndim - 2) + t.shape[2:])
    return acc.sum(axis=0)


def joint_tensor(policy) -> np.ndarray:
    """Joint action probabilities with shape ``(H, S, A_0, ..., A_{m-1})``."""
    mix = _as_mixture(policy)
    return np.stack([_stage_joint(mix.weights[h], [c[h] for c in mix.components])
                     for h in range(mix.horizon)])


def joint_action_distribution(mixture, h: int, s: int) -> np.ndarray:
    """Flat distribution over joint actions at ``(h, s)``."""
    mix = _as_mixture(mixture)
    tables = [c[h, :, s:s + 1] for c in mix.components]
    return _stage_joint(mix.weights[h], tables)[0].reshape(-1)


def marginal_excluding(mixture, h: int, s: int, i: int) -> np.ndarray:
    """Correlated distribution of all agents but ``i``, flattened in mixed radix."""
    mix = _as_mixture(mixture)
    tables = [c[h, :, s:s + 1] for j, c in enumerate(mix.components) if j != i]
    if not tables:
        return np.ones(1)
    return _stage_joint(mix.weights[h], tables)[0].reshape(-1)


def average_agent_policy(components, weights) -> np.ndarray:
    """Convex combination of per-round tables stacked on the leading axis."""
    components = np.asarray(components, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    return np.tensordot(weights, components, axes=(0, 0))


def policy_to_json(policy) -> dict:
    if isinstance(policy, ProductMarkovPolicy):
        return {"type": "product", "tables": [t.tolist() for t in policy.tables]}
    return {
        "type": "mixture",
        "weights": policy.weights.tolist(),
        "components": [c.tolist() for c in policy.components],
    }


def policy_from_json(doc: dict):
    if doc.get("type") == "product":
        return ProductMarkovPolicy(tuple(np.asarray(t, dtype=np.float64) for t in doc["tables"]))
    return MixturePolicy(np.asarray(doc["weights"], dtype=np.float64),
                         tuple(np.asarray(c, dtype=np.float64) for c in doc["components"]))


def save_policy(policy, path) -> None:
    Path(path).write_text(json.dumps(policy_to_json(policy)))


def load_policy(path):
    return policy_from_json(json.loads(Path(path).read_text()))
