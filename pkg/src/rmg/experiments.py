"""Random games, parameter sweeps and learning diagnostics."""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exact import cce_gap, ne_gap
from .game import (MAX_JOINT_ACTIONS, GameValidationError, RobustMarkovGame, load_game,
                   validate)
from .hard import HardInstanceParams, hard_rmdp
from .policies import joint_tensor, save_policy
from .qftrl import AlgoConfig, run_robust_qftrl, theory_c_b
from .rng import RandomStream

__all__ = [
    "CSV_COLUMNS",
    "RandomGameSpec",
    "ExperimentConfig",
    "SweepRow",
    "generate_random_game",
    "build_game",
    "run_cell",
    "run_sweep",
    "rows_to_csv",
    "theta_recovery_stat",
    "median_by_k",
]

CSV_COLUMNS = ("K", "R", "seed", "cce_gap", "ne_gap", "max_agent_gap", "wall_time_ms",
               "sample_count", "error")

_KERNEL_TAG = 11
_REWARD_TAG = 12


@dataclass(frozen=True)
class RandomGameSpec:
    num_agents: int
    num_states: int
    action_counts: tuple[int, ...]
    horizon: int
    uncertainty_level: float = 0.0
    seed: int = 0
    zero_sum: bool = False

    def __post_init__(self):
        object.__setattr__(self, "action_counts", tuple(int(a) for a in self.action_counts))


def generate_random_game(spec: RandomGameSpec) -> RobustMarkovGame:
    """Kernel rows are normalized uniform draws, rewards are uniform in [0, 1].

    With ``zero_sum`` the second player's reward is ``1 - r_0``.
    """
    m, S, H = spec.num_agents, spec.num_states, spec.horizon
    J = math.prod(spec.action_counts)
    if J > MAX_JOINT_ACTIONS:
        raise GameValidationError(f"{J} joint actions exceeds dense-storage cap {MAX_JOINT_ACTIONS}")
    if spec.zero_sum and m != 2:
        raise GameValidationError("zero-sum generation needs exactly 2 agents")
    stream = RandomStream(spec.seed)
    raw = np.asarray(stream.child(_KERNEL_TAG).random(H * S * J * S)).reshape(H, S, J, S)
    # keep draws strictly positive so no row can collapse to zero mass
    raw = raw + 1e-12
    kernel = raw / raw.sum(axis=-1, keepdims=True)
    rewards = np.asarray(stream.child(_REWARD_TAG).random(m * H * S * J)).reshape(m, H, S, J)
    if spec.zero_sum:
        rewards[1] = 1.0 - rewards[0]
    game = RobustMarkovGame(m, S, spec.action_counts, H, kernel, rewards, spec.uncertainty_level)
    validate(game)
    return game


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep.

    ``game`` is one of ``{"path": ...}``, ``{"random": {RandomGameSpec fields}}``
    or ``{"hard": {"horizon", "uncertainty", "epsilon", "theta", ...}}``.  The
    grid's ``R`` values override the game's own uncertainty level.
    """

    game: dict
    K_values: tuple[int, ...]
    R_values: tuple[float, ...]
    seeds: tuple[int, ...]
    c_alpha: float = 24.0
    c_b: float = 0.5
    delta: float = 0.01
    theory_constants: bool = False
    out: Optional[str] = None
    parallelism: int = 1
    record_timing: bool = False
    policy_dir: Optional[str] = None

    def __post_init__(self):
        for name in ("K_values", "R_values", "seeds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not (self.K_values and self.R_values and self.seeds):
            raise ValueError("sweep grid must be non-empty")
        if min(self.K_values) < 1:
            raise ValueError("every K must be >= 1")
        if not all(0.0 <= R < 1.0 for R in self.R_values):
            raise ValueError("every R must lie in [0,1)")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        algo = doc.get("algo", {})
        return cls(
            game=doc["game"],
            K_values=doc["K"],
            R_values=doc["R"],
            seeds=doc["seeds"],
            c_alpha=algo.get("c_alpha", float(os.environ.get("RMG_C_ALPHA", 24.0))),
            c_b=algo.get("c_b", float(os.environ.get("RMG_C_B", 0.5))),
            delta=algo.get("delta", float(os.environ.get("RMG_DELTA", 0.01))),
            theory_constants=algo.get("theory_constants", False),
            out=doc.get("out"),
            parallelism=doc.get("parallelism", 1),
            record_timing=doc.get("record_timing", False),
            policy_dir=doc.get("policy_dir"),
        )

    def algo_config(self, K: int, seed: int) -> AlgoConfig:
        c_b = theory_c_b(self.c_alpha) if self.theory_constants else self.c_b
        return AlgoConfig(K=K, c_alpha=self.c_alpha, c_b=c_b, delta=self.delta, seed=seed)


@dataclass
class SweepRow:
    K: int
    R: float
    seed: int
    cce_gap: float = math.nan
    ne_gap: Optional[float] = None
    max_agent_gap: list[float] = field(default_factory=list)
    wall_time_ms: Optional[float] = None
    sample_count: int = 0
    error: str = ""

    def csv_fields(self) -> list[str]:
        def num(x):
            return "" if x is None else format(x, ".17g")
        return [
            str(self.K), num(self.R), str(self.seed), num(self.cce_gap), num(self.ne_gap),
            ";".join(num(g) for g in self.max_agent_gap), num(self.wall_time_ms),
            str(self.sample_count), self.error,
        ]


def build_game(source: dict, R: Optional[float] = None) -> RobustMarkovGame:
    if "path" in source:
        game = load_game(source["path"])
    elif "random" in source:
        game = generate_random_game(RandomGameSpec(**source["random"]))
    elif "hard" in source:
        hard = source["hard"]
        params = HardInstanceParams(
            H=hard["horizon"], R=hard.get("uncertainty", 0.0) if R is None else R,
            epsilon=hard["epsilon"], c=hard.get("c", 0.75), c1=hard.get("c1", 1.0))
        return hard_rmdp(params, hard["theta"])
    else:
        raise GameValidationError(f"unknown game source {sorted(source)}")
    return game if R is None else game.with_uncertainty(R)


def run_cell(config: ExperimentConfig, K: int, R: float, seed: int) -> SweepRow:
    row = SweepRow(K=K, R=R, seed=seed)
    start = time.perf_counter()
    try:
        game = build_game(config.game, R)
        out = run_robust_qftrl(game, config.algo_config(K, seed))
        report = cce_gap(game, out.mixture)
        row.cce_gap = report.cce_gap
        row.max_agent_gap = report.max_agent_gap.tolist()
        row.sample_count = out.sample_count
        if out.zero_sum_products is not None:
            row.ne_gap = ne_gap(game, out.zero_sum_products).ne_gap
        if config.policy_dir:
            Path(config.policy_dir).mkdir(parents=True, exist_ok=True)
            save_policy(out.mixture, Path(config.policy_dir) / f"policy_K{K}_R{R!r}_seed{seed}.json")
    except Exception as exc:  # recorded per cell, the sweep goes on
        row.error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    if config.record_timing:
        row.wall_time_ms = (time.perf_counter() - start) * 1e3
    return row


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(config: ExperimentConfig) -> list[SweepRow]:
    cells = [(config, K, R, seed) for K in sorted(config.K_values)
             for R in sorted(config.R_values) for seed in sorted(config.seeds)]
    if config.parallelism == 1:
        rows = [run_cell(*c) for c in cells]
    else:
        with ProcessPoolExecutor(config.parallelism) as pool:
            rows = list(pool.map(_run_cell_args, cells))
    rows.sort(key=lambda r: (r.K, r.R, r.seed))
    if config.out:
        Path(config.out).write_text(rows_to_csv(rows))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.csv_fields())
    return buf.getvalue()


def theta_recovery_stat(game: RobustMarkovGame, theta, mixture) -> float:
    """Fraction of steps where the state-0 action marginal favours ``theta[h]`` strictly.

    Ties count as misses.
    """
    theta = np.asarray(theta, dtype=np.int64)
    if game.num_agents != 1 or game.action_counts != (2,) or len(theta) != game.horizon:
        raise ValueError("theta recovery applies to single-agent two-action hard instances")
    at_zero = joint_tensor(mixture)[:, 0]  # (H, 2)
    steps = np.arange(game.horizon)
    return float(np.mean(at_zero[steps, theta] > at_zero[steps, 1 - theta]))


def median_by_k(rows, column: str = "cce_gap") -> dict[int, float]:
    out: dict[int, list[float]] = {}
    for row in rows:
        value = getattr(row, column)
        if value is not None and not row.error:
            out.setdefault(row.K, []).append(value)
    return {K: float(np.median(v)) for K, v in sorted(out.items())}

