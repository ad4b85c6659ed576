"""Seeded Monte Carlo runs over sampled function pairs, plus CSV/JSON persistence.

Random streams are derived, never chained: the environment of pair ``i`` uses
``SeedSequence([master_seed, i, 0])`` and policy ``p`` on that pair uses
``SeedSequence([master_seed, i, 1 + POLICY_IDS.index(p)])``. Dropping pairs
or policies therefore leaves every other episode untouched.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import ExperimentConfig, save_config
from .environment import (
    RejectionBudgetExhausted,
    SwitchingEnvironment,
    sample_pieces,
    save_environments,
)
from .metrics import (
    METRICS,
    AggregateCurve,
    Row,
    RunRecord,
    aggregate,
    filter_local_maxima_runs,
    normalized_regret,
    unsafe_count,
)
from .policies import POLICY_IDS, SEED_SET_POLICIES, initialize_policy

log = logging.getLogger(__name__)

TRACE_HEADER = ("t", "policy", "pair", "x", "y", "f_true", "gap", "unsafe",
                "declared_change", "used_fallback")
CURVE_HEADER = ("t", "policy", "metric", "mean", "std", "n")
CURVE_METRICS = tuple(METRICS)


class EpisodeError(RuntimeError):
    pass


def environment_seed(cfg: ExperimentConfig, pair: int) -> list[int]:
    return [cfg.master_seed, pair, 0]


def episode_seed(cfg: ExperimentConfig, pair: int, policy_id: str) -> list[int]:
    return [cfg.master_seed, pair, 1 + POLICY_IDS.index(policy_id)]


def make_environment(cfg: ExperimentConfig, pair: int) -> SwitchingEnvironment:
    seed = environment_seed(cfg, pair)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    try:
        pieces = sample_pieces(
            cfg.grid(), cfg.kernel(), len(cfg.change_times) + 1, cfg.bound_b,
            cfg.seed_point, rng,
            threshold=cfg.threshold,
            seed_margin=cfg.seed_margin,
            perturbation_variance=cfg.perturbation_variance,
            max_attempts=cfg.max_attempts,
        )
    except RejectionBudgetExhausted as exc:
        raise RejectionBudgetExhausted(f"pair {pair}: {exc}") from exc
    return SwitchingEnvironment(
        grid=cfg.grid(),
        pieces=pieces,
        change_times=cfg.change_times,
        noise_variance=cfg.noise_variance,
        bound_b=cfg.bound_b,
        threshold=cfg.threshold,
        lipschitz=cfg.lipschitz,
        seed_point=cfg.seed_point,
        generator_seed=seed,
    )


def initial_seeds(policy_id: str, env: SwitchingEnvironment) -> list[float]:
    """Single seed point for most policies; the full true seed set for the seed genies."""
    if policy_id in SEED_SET_POLICIES:
        return env.safe_seed_set(0)
    return [env.seed_point]


def run_episode(
    cfg: ExperimentConfig,
    policy_id: str,
    env: SwitchingEnvironment,
    seed,
    *,
    pair: int = 0,
    keep_decisions: bool = False,
) -> RunRecord:
    """Run one policy for ``cfg.horizon`` steps against ``env``.

    ``seed`` is anything ``SeedSequence`` accepts; it is split into an
    observation-noise stream and a stream for the policy's own coin flips.
    """
    noise_ss, decision_ss = np.random.SeedSequence(seed).spawn(2)
    noise_rng = np.random.default_rng(noise_ss)

    def observe(x: float, t: int) -> float:
        return env.observe(x, t, noise_rng)

    rows: list[Row] = []
    decisions = [] if keep_decisions else None
    try:
        policy = initialize_policy(
            policy_id,
            cfg.policy_config(),
            env.points,
            cfg.kernel(),
            initial_seeds(policy_id, env),
            observe,
            np.random.default_rng(decision_ss),
            change_times=env.change_times,
            seed_oracle=env.safe_seed_set,
            true_value=lambda x: env.value(x, 0),
        )
        for t in range(cfg.horizon):
            d = policy.step(t)
            f_true = env.value(d.chosen_x, t)
            rows.append(Row(t, d.chosen_x, d.y, f_true, env.global_max(t) - d.y,
                            f_true < env.threshold, d.declared_change, d.used_fallback))
            if keep_decisions:
                decisions.append(d)
    except Exception as exc:
        raise EpisodeError(f"policy {policy_id}, pair {pair}, step {len(rows)}: {exc}") from exc
    return RunRecord.from_rows(policy_id, pair, seed, rows, decisions)


def run_pair(cfg: ExperimentConfig, pair: int, keep_decisions: bool = False):
    env = make_environment(cfg, pair)
    records = {
        p: run_episode(cfg, p, env, episode_seed(cfg, pair, p), pair=pair,
                       keep_decisions=keep_decisions)
        for p in cfg.policies
    }
    return env, records


@dataclass(eq=False)
class ExperimentBundle:
    config: ExperimentConfig
    environments: list[SwitchingEnvironment]
    records: dict[str, list[RunRecord]]
    curves: dict[tuple[str, str], AggregateCurve] = field(default_factory=dict)


def compute_curves(
    records: dict[str, list[RunRecord]], tail_len: int, tol: float
) -> dict[tuple[str, str], AggregateCurve]:
    """gap / regret / unsafe_cum curves per policy, plus ``*_filtered`` variants.

    The filtered variants drop runs that ended trapped away from the global
    maximum; they are omitted when every run of a policy is dropped.
    """
    curves = {}
    for policy, recs in records.items():
        recs = sorted(recs, key=lambda r: r.pair)
        if not recs:
            continue
        kept, _ = filter_local_maxima_runs(recs, tail_len, tol) if len(recs[0]) else (recs, [])
        for metric in CURVE_METRICS:
            curves[(policy, metric)] = aggregate(recs, metric)
            if kept:
                curves[(policy, metric + "_filtered")] = aggregate(kept, metric)
    return curves


def run_experiment(
    cfg: ExperimentConfig, *, workers: int = 1, keep_decisions: bool = False
) -> ExperimentBundle:
    pairs = range(cfg.n_pairs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_pair, [cfg] * cfg.n_pairs, pairs,
                                    [keep_decisions] * cfg.n_pairs))
    else:
        results = []
        for i in pairs:
            results.append(run_pair(cfg, i, keep_decisions))
            if (i + 1) % 10 == 0:
                log.info("finished %d/%d pairs", i + 1, cfg.n_pairs)
    envs = [env for env, _ in results]
    records = {p: [recs[p] for _, recs in results] for p in cfg.policies}
    curves = compute_curves(records, cfg.tail_len, cfg.tol)
    return ExperimentBundle(cfg, envs, records, curves)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_traces(records: Iterable[RunRecord], path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for rec in records:
            for row in rec.rows:
                w.writerow([_fmt(v) for v in (row.t, rec.policy, rec.pair, row.x, row.y,
                            row.f_true, row.gap, row.unsafe, row.declared_change,
                            row.used_fallback)])
    return path


def write_curves(curves: dict[tuple[str, str], AggregateCurve], path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for (policy, metric), curve in curves.items():
            for t, m, s in zip(curve.t, curve.mean, curve.std):
                w.writerow([int(t), policy, metric, _fmt(m), _fmt(s), curve.n])
    return path


def _ordered_records(bundle: ExperimentBundle) -> list[RunRecord]:
    n = len(bundle.environments)
    return [bundle.records[p][i] for i in range(n) for p in bundle.config.policies]


def write_outputs(bundle: ExperimentBundle, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return {
            "traces": write_traces(_ordered_records(bundle), out / "traces.csv"),
            "curves": write_curves(bundle.curves, out / "curves.csv"),
            "config": save_config(bundle.config, out / "config.json"),
            "environments": save_environments(bundle.environments, out / "environments.json"),
        }
    except OSError as exc:
        raise OSError(f"cannot write outputs to {exc.filename or out}: {exc.strerror}") from exc


def read_traces(path) -> dict[str, list[RunRecord]]:
    """Rebuild per-policy run records (ordered by pair) from a traces.csv file."""
    grouped: dict[tuple[str, int], list[Row]] = defaultdict(list)
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRACE_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing trace columns {sorted(missing)}")
        for r in reader:
            grouped[(r["policy"], int(r["pair"]))].append(Row(
                int(r["t"]), float(r["x"]), float(r["y"]), float(r["f_true"]),
                float(r["gap"]), r["unsafe"] == "1", r["declared_change"] == "1",
                r["used_fallback"] == "1",
            ))
    records: dict[str, list[RunRecord]] = defaultdict(list)
    for (policy, pair), rows in sorted(grouped.items(), key=lambda kv: kv[0][1]):
        rows.sort(key=lambda row: row.t)
        records[policy].append(RunRecord.from_rows(policy, pair, None, rows))
    return dict(records)


def read_curves(path) -> dict[tuple[str, str], dict[str, np.ndarray]]:
    out: dict[tuple[str, str], dict[str, list]] = defaultdict(lambda: defaultdict(list))
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            cols = out[(r["policy"], r["metric"])]
            cols["t"].append(int(r["t"]))
            cols["mean"].append(float(r["mean"]))
            cols["std"].append(float(r["std"]))
            cols["n"].append(int(r["n"]))
    return {k: {c: np.asarray(v) for c, v in cols.items()} for k, cols in out.items()}


def summarize(records: dict[str, list[RunRecord]], horizon: int) -> list[tuple[str, float, float]]:
    """(policy, mean R(T), mean U(T)) for a quick console report."""
    out = []
    for policy, recs in records.items():
        if not recs or horizon == 0:
            continue
        out.append((policy,
                    float(np.mean([normalized_regret(r, horizon) for r in recs])),
                    float(np.mean([unsafe_count(r, horizon) for r in recs]))))
    return out
