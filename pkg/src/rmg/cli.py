"""Command-line entry point: ``rmg <subcommand> ...``.

Exit codes: 0 success, 1 validation error, 2 sweep finished with failed cells.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .exact import cce_gap, ne_gap
from .experiments import ExperimentConfig, RandomGameSpec, generate_random_game, run_sweep
from .game import GameValidationError, game_to_json, load_game, save_game
from .hard import HardInstanceParams, closed_form_table, hard_rmdp
from .policies import ProductMarkovPolicy, load_policy, save_policy
from .qftrl import AlgoConfig, run_robust_qftrl, theory_c_b
from .rng import RandomStream


def _env_float(name: str, default: float) -> float:
    return float(os.environ.get(name, default))


def _add_algo_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c-alpha", type=float, default=_env_float("RMG_C_ALPHA", 24.0))
    p.add_argument("--c-b", type=float, default=_env_float("RMG_C_B", 0.5))
    p.add_argument("--delta", type=float, default=_env_float("RMG_DELTA", 0.01))
    p.add_argument("--theory-constants", action="store_true",
                   help="use c_b = 2 sqrt(c_alpha + 1) instead of --c-b")


def cmd_generate(args) -> int:
    spec = RandomGameSpec(args.agents, args.states, tuple(args.actions), args.horizon,
                          args.uncertainty, args.seed, args.zero_sum)
    save_game(generate_random_game(spec), args.out)
    return 0


def cmd_solve(args) -> int:
    game = load_game(args.game)
    c_b = theory_c_b(args.c_alpha) if args.theory_constants else args.c_b
    config = AlgoConfig(K=args.rounds, c_alpha=args.c_alpha, c_b=c_b, delta=args.delta,
                        seed=args.seed, record_trace=args.trace is not None, workers=args.workers)
    out = run_robust_qftrl(game, config)
    save_policy(out.mixture, args.out)
    if out.zero_sum_products is not None:
        save_policy(out.zero_sum_products, Path(args.out).with_suffix(".product.json"))
    if args.trace:
        doc = {
            "values": out.values.tolist(),
            "bonus": out.bonus.tolist(),
            "q_tables": [q.tolist() for q in out.q_tables],
            "sample_count": out.sample_count,
            "violations": out.violations,
            "range_warnings": out.range_warnings,
        }
        if out.trace and "q" in out.trace:
            doc["q"] = [q.tolist() for q in out.trace["q"]]
            doc["next_state"] = [n.tolist() for n in out.trace["next_state"]]
        Path(args.trace).write_text(json.dumps(doc))
    print(f"samples={out.sample_count} violations={len(out.violations)}")
    return 0


def cmd_evaluate(args) -> int:
    game = load_game(args.game)
    policy = load_policy(args.policy)
    report = cce_gap(game, policy)
    doc = report.to_json()
    if args.ne:
        if not isinstance(policy, ProductMarkovPolicy):
            print("--ne needs a product policy file", file=sys.stderr)
            return 1
        doc["ne_gap"] = ne_gap(game, policy).ne_gap
    Path(args.out).write_text(json.dumps(doc))
    print(f"cce_gap={report.cce_gap!r}" + (f" ne_gap={doc['ne_gap']!r}" if args.ne else ""))
    return 0


def _hard_params(args) -> HardInstanceParams:
    return HardInstanceParams(H=args.horizon, R=args.uncertainty, epsilon=args.epsilon,
                              c=args.c, c1=args.c1)


def _print_closed_form(params: HardInstanceParams) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["h", "V0", "V1"])
    for h, (v0, v1) in enumerate(closed_form_table(params)):
        writer.writerow([h, format(v0, ".17g"), format(v1, ".17g")])


def cmd_hard_instance(args) -> int:
    params = _hard_params(args)
    if args.theta is not None:
        theta = [int(b) for b in args.theta]
    elif args.random_theta is not None:
        u = RandomStream(args.random_theta).uniform(np.arange(params.H))
        theta = (np.asarray(u) < 0.5).astype(int).tolist()
    else:
        theta = [0] * params.H
    game = hard_rmdp(params, theta)
    if args.out:
        doc = game_to_json(game)
        doc["theta"] = theta
        Path(args.out).write_text(json.dumps(doc))
    if args.closed_form:
        _print_closed_form(params)
    return 0


def cmd_closed_form(args) -> int:
    _print_closed_form(_hard_params(args))
    return 0


def cmd_sweep(args) -> int:
    doc = json.loads(Path(args.config).read_text())
    if args.out:
        doc["out"] = args.out
    if args.parallelism:
        doc["parallelism"] = args.parallelism
    rows = run_sweep(ExperimentConfig.from_json(doc))
    failed = sum(1 for r in rows if r.error)
    print(f"{len(rows)} cells, {failed} failed")
    return 2 if failed else 0


def _hard_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--uncertainty", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--c", type=float, default=0.75)
    p.add_argument("--c1", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="random game JSON")
    p.add_argument("--agents", type=int, default=2)
    p.add_argument("--states", type=int, default=3)
    p.add_argument("--actions", type=int, nargs="+", default=[2, 2])
    p.add_argument("--horizon", type=int, default=4)
    p.add_argument("--uncertainty", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-sum", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="run robust Q-FTRL")
    p.add_argument("--game", required=True)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    _add_algo_args(p)
    p.add_argument("--trace")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="exact robust CCE/NE gaps")
    p.add_argument("--game", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--ne", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("hard-instance", help="two-state lower-bound instance")
    _hard_args(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--theta", help="bit string such as 0110...")
    group.add_argument("--random-theta", type=int, metavar="SEED")
    p.add_argument("--closed-form", action="store_true", help="print the optimal value table as CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_hard_instance)

    p = sub.add_parser("closed-form", help="optimal value table of the hard instance as CSV")
    _hard_args(p)
    p.set_defaults(func=cmd_closed_form)

    p = sub.add_parser("sweep", help="grid over (K, R, seed)")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--parallelism", type=int)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (GameValidationError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
