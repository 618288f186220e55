"""Solve the two-state hard instance and report how often the learned
policy prefers the better action at state 0, plus the suboptimality gap.

    python3 scripts/hard_instance_recovery.py --horizon 8 --uncertainty 0.2 --epsilon 3 --K 256 4096
"""

import argparse
import sys

import numpy as np

from rmg.exact import ne_gap
from rmg.experiments import theta_recovery_stat
from rmg.hard import HardInstanceParams, hard_rmdp
from rmg.policies import ProductMarkovPolicy, joint_tensor
from rmg.qftrl import AlgoConfig, run_robust_qftrl
from rmg.rng import RandomStream


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--horizon", type=int, default=8)
    ap.add_argument("--uncertainty", type=float, default=0.2)
    ap.add_argument("--epsilon", type=float, default=3.0)
    ap.add_argument("--K", type=int, nargs="+", default=[256, 4096])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--theta-seed", type=int, default=0)
    ap.add_argument("--c-b", type=float, default=0.5)
    args = ap.parse_args(argv)

    params = HardInstanceParams(args.horizon, args.uncertainty, args.epsilon)
    theta = (np.asarray(RandomStream(args.theta_seed).uniform(np.arange(params.H))) < 0.5).astype(int)
    game = hard_rmdp(params, theta)
    print(f"p={params.p:.4g} q={params.q:.4g} gap/p={params.delta_gap / params.p:.3f} "
          f"theta={''.join(map(str, theta))}")
    print("K,seed,recovery,ne_gap")
    for K in args.K:
        stats, gaps = [], []
        for seed in range(args.seeds):
            out = run_robust_qftrl(game, AlgoConfig(K=K, seed=seed, c_b=args.c_b))
            stats.append(theta_recovery_stat(game, theta, out.mixture))
            gaps.append(ne_gap(game, ProductMarkovPolicy((joint_tensor(out.mixture),))).ne_gap)
            print(f"{K},{seed},{stats[-1]:.4f},{gaps[-1]:.6g}")
        print(f"# K={K}: median recovery {np.median(stats):.3f}, "
              f"share >= 0.9 {np.mean(np.array(stats) >= 0.9):.2f}, median gap {np.median(gaps):.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
