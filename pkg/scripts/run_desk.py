"""Desk-scale batch: every policy on 100 pairs (T=100, change at t=50).

Writes the usual output files and prints a per-policy summary with regret,
unsafe counts, terminal gap, detection statistics and the local-maxima split.

    python scripts/run_desk.py --out runs/desk --workers 4
"""

import argparse
from pathlib import Path

import numpy as np

from safeswitch.config import DEFAULT_POLICIES, ExperimentConfig
from safeswitch.harness import run_experiment, write_outputs
from safeswitch.metrics import (
    detection_stats,
    filter_local_maxima_runs,
    normalized_regret,
    unsafe_count,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs/desk"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--noise", type=float, default=0.0)
    ap.add_argument("--pairs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = ExperimentConfig.preset("desk", noise_variance=args.noise, n_pairs=args.pairs,
                                  master_seed=args.seed, policies=DEFAULT_POLICIES)
    bundle = run_experiment(cfg, workers=args.workers)
    write_outputs(bundle, args.out)

    T = cfg.horizon
    print(f"{'policy':18s} {'R(T)':>7s} {'U(T)':>6s} {'tail10':>7s} {'det@tc':>7s} "
          f"{'false':>6s} {'kept':>5s} {'U kept':>7s}")
    for p, recs in bundle.records.items():
        R = np.mean([normalized_regret(r, T) for r in recs])
        U = np.mean([unsafe_count(r, T) for r in recs])
        tail = np.mean([r.gap[-10:].mean() for r in recs])
        stats = [detection_stats(r, cfg.change_times) for r in recs]
        exact = np.mean([s.delays[0] == 0 for s in stats])
        false = np.mean([s.false_declarations for s in stats])
        kept, _ = filter_local_maxima_runs(recs, cfg.tail_len, cfg.tol)
        U_kept = np.mean([unsafe_count(r, T) for r in kept]) if kept else float("nan")
        print(f"{p:18s} {R:7.3f} {U:6.2f} {tail:7.3f} {exact:7.2f} {false:6.2f} "
              f"{len(kept):5d} {U_kept:7.2f}")
    print(f"outputs in {args.out}")


if __name__ == "__main__":
    main()
