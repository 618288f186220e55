"""Median CCE gap against the round budget K on one random game.

    python3 scripts/run_learning_curve.py --K 64 256 1024 --seeds 20 --out curve.csv
"""

import argparse
import sys

from rmg.experiments import ExperimentConfig, median_by_k, run_sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--K", type=int, nargs="+", default=[64, 256, 1024])
    ap.add_argument("--R", type=float, nargs="+", default=[0.2])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--states", type=int, default=3)
    ap.add_argument("--horizon", type=int, default=4)
    ap.add_argument("--game-seed", type=int, default=0)
    ap.add_argument("--c-b", type=float, default=0.5)
    ap.add_argument("--parallelism", type=int, default=1)
    ap.add_argument("--out", default="learning_curve.csv")
    args = ap.parse_args(argv)

    game = {"random": {"num_agents": 2, "num_states": args.states, "action_counts": [2, 2],
                       "horizon": args.horizon, "seed": args.game_seed}}
    config = ExperimentConfig(game=game, K_values=args.K, R_values=args.R,
                              seeds=range(args.seeds), c_b=args.c_b, out=args.out,
                              parallelism=args.parallelism)
    rows = run_sweep(config)
    for R in sorted(args.R):
        medians = median_by_k([r for r in rows if r.R == R])
        print(f"R={R}: " + "  ".join(f"K={K} {g:.4f}" for K, g in medians.items()))
    print(f"rows written to {args.out}")
    return 2 if any(r.error for r in rows) else 0


if __name__ == "__main__":
    sys.exit(main())
