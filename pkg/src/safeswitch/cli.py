"""Command-line entry point: ``run``, ``sample-env`` and ``metrics``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import PRESETS, ExperimentConfig, load_config
from .environment import save_environments
from .harness import (
    compute_curves,
    make_environment,
    read_traces,
    run_experiment,
    summarize,
    write_curves,
    write_outputs,
)


def resolve_config(args) -> ExperimentConfig:
    """defaults <- config file <- preset <- individual flags."""
    values = load_config(args.config) if args.config else {}
    if getattr(args, "preset", None):
        values.update(PRESETS[args.preset])
    if getattr(args, "seed", None) is not None:
        values["master_seed"] = args.seed
    if getattr(args, "policies", None):
        values["policies"] = [p.strip() for p in args.policies.split(",") if p.strip()]
    if getattr(args, "noise", None) is not None:
        values["noise_variance"] = args.noise
    if getattr(args, "pairs", None) is not None:
        values["n_pairs"] = args.pairs
    return ExperimentConfig.from_dict(values)


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    bundle = run_experiment(cfg, workers=args.workers)
    write_outputs(bundle, args.out)
    for policy, regret, unsafe in summarize(bundle.records, cfg.horizon):
        print(f"{policy:18s} R(T)={regret:.4f} U(T)={unsafe:.2f}")
    return 0


def cmd_sample_env(args) -> int:
    cfg = resolve_config(args)
    envs = [make_environment(cfg, i) for i in range(cfg.n_pairs)]
    save_environments(envs, args.out)
    return 0


def cmd_metrics(args) -> int:
    records = read_traces(args.traces)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_curves(compute_curves(records, args.tail_len, args.tol), out / "curves.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="safeswitch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte Carlo experiment over sampled function pairs")
    run.add_argument("--config", help="JSON file with ExperimentConfig fields")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--preset", choices=sorted(PRESETS))
    run.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    run.add_argument("--policies", help="comma-separated policy ids")
    run.add_argument("--noise", type=float, help="observation noise variance")
    run.add_argument("--pairs", type=int, help="number of function pairs")
    run.add_argument("--workers", type=int, default=1, help="worker processes")
    run.set_defaults(func=cmd_run)

    env = sub.add_parser("sample-env", help="generate environments only")
    env.add_argument("--config", help="JSON file with ExperimentConfig fields")
    env.add_argument("--out", required=True, help="output JSON path")
    env.add_argument("--preset", choices=sorted(PRESETS))
    env.add_argument("--seed", type=int)
    env.add_argument("--pairs", type=int)
    env.set_defaults(func=cmd_sample_env)

    met = sub.add_parser("metrics", help="recompute curves.csv from a traces.csv")
    met.add_argument("--traces", required=True)
    met.add_argument("--out", required=True, help="output directory")
    met.add_argument("--tail-len", type=int, default=20)
    met.add_argument("--tol", type=float, default=0.25)
    met.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # one-line reason, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
