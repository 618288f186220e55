import json

import numpy as np
import pytest

from rmg.exact import cce_gap
from rmg.experiments import (CSV_COLUMNS, ExperimentConfig, RandomGameSpec, SweepRow, build_game,
                             generate_random_game, median_by_k, rows_to_csv, run_cell, run_sweep,
                             theta_recovery_stat)
from rmg.game import GameValidationError, game_to_json
from rmg.hard import HardInstanceParams, hard_rmdp, optimal_theta_policy
from rmg.policies import MixturePolicy, load_policy
from rmg.qftrl import AlgoConfig, run_robust_qftrl

SMALL = {"random": {"num_agents": 2, "num_states": 2, "action_counts": [2, 2], "horizon": 2,
                    "seed": 3}}


def test_generation_is_deterministic():
    spec = RandomGameSpec(2, 3, (2, 3), 3, 0.1, seed=42)
    a = json.dumps(game_to_json(generate_random_game(spec)))
    b = json.dumps(game_to_json(generate_random_game(spec)))
    assert a == b
    c = json.dumps(game_to_json(generate_random_game(RandomGameSpec(2, 3, (2, 3), 3, 0.1, seed=43))))
    assert a != c


def test_single_state_rows_are_one():
    game = generate_random_game(RandomGameSpec(2, 1, (2, 2), 3))
    assert np.all(game.kernel == 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_rewards_in_unit_interval(seed):
    game = generate_random_game(RandomGameSpec(3, 2, (2, 1, 2), 2, seed=seed))
    assert game.rewards.min() >= 0 and game.rewards.max() <= 1


def test_zero_sum_generation():
    game = generate_random_game(RandomGameSpec(2, 2, (2, 2), 2, zero_sum=True))
    np.testing.assert_array_equal(game.rewards[0] + game.rewards[1], 1.0)
    assert game.is_zero_sum()
    with pytest.raises(GameValidationError):
        generate_random_game(RandomGameSpec(3, 2, (2, 2, 2), 2, zero_sum=True))


def test_generation_cap():
    with pytest.raises(GameValidationError, match="cap"):
        generate_random_game(RandomGameSpec(7, 1, (10,) * 7, 1))


@pytest.mark.parametrize("kwargs", [dict(K_values=[]), dict(K_values=[0]), dict(R_values=[1.0]),
                                    dict(seeds=[]), dict(parallelism=0)])
def test_config_rejects(kwargs):
    base = dict(game=SMALL, K_values=[4], R_values=[0.0], seeds=[0])
    base.update(kwargs)
    with pytest.raises(ValueError):
        ExperimentConfig(**base)


def test_config_env_override(monkeypatch):
    monkeypatch.setenv("RMG_C_B", "0.125")
    cfg = ExperimentConfig.from_json({"game": SMALL, "K": [2], "R": [0.0], "seeds": [0]})
    assert cfg.c_b == 0.125
    cfg = ExperimentConfig.from_json({"game": SMALL, "K": [2], "R": [0.0], "seeds": [0],
                                      "algo": {"c_b": 0.25}})
    assert cfg.algo_config(2, 0).c_b == 0.25


def test_single_cell_matches_direct_run():
    cfg = ExperimentConfig(game=SMALL, K_values=[16], R_values=[0.3], seeds=[5])
    (row,) = run_sweep(cfg)
    game = build_game(SMALL, 0.3)
    out = run_robust_qftrl(game, AlgoConfig(K=16, seed=5))
    report = cce_gap(game, out.mixture)
    assert row.cce_gap == report.cce_gap
    assert row.max_agent_gap == report.max_agent_gap.tolist()
    assert row.sample_count == 16 * 2 * 2 * 4
    assert row.ne_gap is None and row.error == "" and row.wall_time_ms is None


def test_rows_sorted_and_csv_schema(tmp_path):
    out = tmp_path / "sweep.csv"
    cfg = ExperimentConfig(game=SMALL, K_values=[8, 2], R_values=[0.2, 0.0], seeds=[1, 0],
                           out=str(out))
    rows = run_sweep(cfg)
    assert [(r.K, r.R, r.seed) for r in rows] == sorted((r.K, r.R, r.seed) for r in rows)
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 9
    assert all(r.cce_gap >= 0 for r in rows)


def test_parallel_sweep_identical(tmp_path):
    doc = dict(game=SMALL, K_values=[4, 8], R_values=[0.0, 0.4], seeds=[0, 1])
    serial = rows_to_csv(run_sweep(ExperimentConfig(**doc)))
    parallel = rows_to_csv(run_sweep(ExperimentConfig(**doc, parallelism=2)))
    assert serial == parallel


def test_persisted_policy_reevaluates(tmp_path):
    cfg = ExperimentConfig(game=SMALL, K_values=[8], R_values=[0.1], seeds=[2],
                           policy_dir=str(tmp_path))
    (row,) = run_sweep(cfg)
    policy = load_policy(tmp_path / "policy_K8_R0.1_seed2.json")
    assert abs(cce_gap(build_game(SMALL, 0.1), policy).cce_gap - row.cce_gap) <= 1e-12


def test_zero_sum_rows_carry_ne_gap():
    game = {"random": dict(SMALL["random"], zero_sum=True)}
    (row,) = run_sweep(ExperimentConfig(game=game, K_values=[8], R_values=[0.0], seeds=[0]))
    assert row.ne_gap is not None and row.ne_gap >= 0


def test_failing_cell_recorded():
    cfg = ExperimentConfig(game={"path": "/nonexistent/game.json"}, K_values=[2], R_values=[0.0],
                           seeds=[0])
    (row,) = run_sweep(cfg)
    assert row.error.startswith("FileNotFoundError")
    assert "FileNotFoundError" in rows_to_csv([row])


def test_timing_column_optional():
    cfg = ExperimentConfig(game=SMALL, K_values=[2], R_values=[0.0], seeds=[0], record_timing=True)
    assert run_cell(cfg, 2, 0.0, 0).wall_time_ms > 0


def test_unknown_source():
    with pytest.raises(GameValidationError):
        build_game({"nope": 1})


def test_hard_source_uses_grid_level():
    src = {"hard": {"horizon": 8, "epsilon": 1.0, "theta": [0, 1] * 4}}
    assert build_game(src, 0.2).uncertainty_level == 0.2


THETA = [1, 0, 1, 1, 0, 0, 1, 0]


def test_theta_recovery_examples():
    game = hard_rmdp(HardInstanceParams(8, 0.2, 1.0), THETA)
    assert theta_recovery_stat(game, THETA, optimal_theta_policy(THETA)) == 1.0
    flipped = [1 - t for t in THETA]
    assert theta_recovery_stat(game, THETA, optimal_theta_policy(flipped)) == 0.0
    uniform = MixturePolicy(np.ones((8, 1)), (np.full((8, 1, 2, 2), 0.5),))
    assert theta_recovery_stat(game, THETA, uniform) == 0.0


def test_theta_recovery_rejects_games():
    game = generate_random_game(RandomGameSpec(2, 2, (2, 2), 2))
    with pytest.raises(ValueError):
        theta_recovery_stat(game, [0, 1], optimal_theta_policy([0, 1]))


def test_median_by_k_skips_failures():
    rows = [SweepRow(4, 0.0, 0, cce_gap=1.0), SweepRow(4, 0.0, 1, cce_gap=3.0),
            SweepRow(8, 0.0, 0, error="boom"), SweepRow(8, 0.0, 1, cce_gap=0.5)]
    assert median_by_k(rows) == {4: 2.0, 8: 0.5}


def test_csv_float_round_trip():
    row = SweepRow(2, 0.1, 0, cce_gap=1 / 3, max_agent_gap=[0.1, 2 / 7])
    fields = row.csv_fields()
    assert float(fields[3]) == 1 / 3
    assert [float(x) for x in fields[5].split(";")] == [0.1, 2 / 7]
