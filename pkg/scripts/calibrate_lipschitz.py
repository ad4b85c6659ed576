"""Empirical Lipschitz constants of sampled environments.

Prints percentiles of max |f(x_{i+1}) - f(x_i)| / dx over a batch of
generated pairs, to check the configured ``lipschitz`` against the 90th
percentile.
"""

import argparse

import numpy as np

from safeswitch.config import ExperimentConfig
from safeswitch.harness import make_environment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=500)
    ap.add_argument("--preset", default="paper")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = ExperimentConfig.preset(args.preset, master_seed=args.seed)
    slopes = np.array([make_environment(cfg, i).empirical_lipschitz() for i in range(args.pairs)])
    for q in (50, 75, 90, 95, 99):
        print(f"p{q:<3d} {np.percentile(slopes, q):.3f}")
    print(f"max  {slopes.max():.3f}")
    ok = cfg.lipschitz >= np.percentile(slopes, 90)
    print(f"configured L = {cfg.lipschitz} {'covers' if ok else 'is below'} the 90th percentile")


if __name__ == "__main__":
    main()
