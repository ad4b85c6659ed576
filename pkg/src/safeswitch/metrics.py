"""Per-run traces and the regret / safety / detection statistics computed from them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np


class HorizonExceedsTrace(ValueError):
    pass


class MixedHorizons(ValueError):
    pass


class Row(NamedTuple):
    t: int
    x: float
    y: float
    f_true: float
    gap: float
    unsafe: bool
    declared_change: bool
    used_fallback: bool


@dataclass(eq=False)
class RunRecord:
    """Column-wise trace of one episode; ``rows`` gives the tuple view."""

    policy: str
    pair: int
    seed: object
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    f_true: np.ndarray
    gap: np.ndarray
    unsafe: np.ndarray
    declared_change: np.ndarray
    used_fallback: np.ndarray
    decisions: list | None = field(default=None, repr=False)

    @classmethod
    def from_rows(cls, policy: str, pair: int, seed, rows: Sequence[Row], decisions=None):
        cols = list(zip(*rows)) if rows else [()] * len(Row._fields)
        dtypes = (int, float, float, float, float, bool, bool, bool)
        arrays = [np.asarray(c, dtype=d) for c, d in zip(cols, dtypes)]
        return cls(policy, pair, seed, *arrays, decisions=decisions)

    def __len__(self):
        return self.t.shape[0]

    @property
    def rows(self) -> list[Row]:
        return [
            Row(int(t), float(x), float(y), float(f), float(g), bool(u), bool(d), bool(b))
            for t, x, y, f, g, u, d, b in zip(
                self.t, self.x, self.y, self.f_true, self.gap,
                self.unsafe, self.declared_change, self.used_fallback,
            )
        ]

    def declaration_times(self) -> list[int]:
        return [int(t) for t in self.t[self.declared_change]]


def instantaneous_gap(env, t: int, y_t: float) -> float:
    """Global maximum of the active piece minus the observed value (can be < 0)."""
    return env.global_max(t) - y_t


def _check_horizon(record: RunRecord, T: int) -> None:
    if T > len(record):
        raise HorizonExceedsTrace(f"horizon {T} exceeds trace length {len(record)}")


def normalized_regret(record: RunRecord, T: int) -> float:
    _check_horizon(record, T)
    if T <= 0:
        raise ValueError("T must be >= 1")
    return float(np.sum(record.gap[:T]) / T)


def unsafe_count(record: RunRecord, T: int) -> int:
    _check_horizon(record, T)
    return int(np.count_nonzero(record.unsafe[:T]))


@dataclass(frozen=True)
class DetectionStats:
    delays: tuple  # one entry per true change: int delay, or None if missed
    false_declarations: int

    @property
    def missed(self) -> int:
        return sum(d is None for d in self.delays)


def detection_stats(record: RunRecord, change_times: Sequence[int]) -> DetectionStats:
    """Delay of the first declaration after each change; everything else is false.

    A change is missed when no declaration lands before the next change (or
    the end of the trace).
    """
    declared = record.declaration_times()
    changes = sorted(int(t) for t in change_times)
    delays = []
    matched = 0
    for tc, nxt in zip(changes, changes[1:] + [np.inf]):
        hits = [d for d in declared if tc <= d < nxt]
        delays.append(hits[0] - tc if hits else None)
        matched += bool(hits)
    return DetectionStats(tuple(delays), len(declared) - matched)


def tail_gap(record: RunRecord, tail_len: int) -> float:
    return float(np.mean(record.gap[-tail_len:]))


def filter_local_maxima_runs(
    records: Iterable[RunRecord], tail_len: int = 20, tol: float = 0.25
) -> tuple[list[RunRecord], list[RunRecord]]:
    """Split runs into (kept, excluded); excluded runs end stuck away from the global max."""
    if tail_len < 1:
        raise ValueError("tail_len must be >= 1")
    kept, excluded = [], []
    for rec in records:
        (excluded if tail_gap(rec, tail_len) > tol else kept).append(rec)
    return kept, excluded


def cumulative_regret_curve(record: RunRecord) -> np.ndarray:
    """``R(T)`` for T = 1..len(record)."""
    return np.cumsum(record.gap) / np.arange(1, len(record) + 1)


def cumulative_unsafe_curve(record: RunRecord) -> np.ndarray:
    return np.cumsum(record.unsafe.astype(int)).astype(float)


METRICS: dict[str, Callable[[RunRecord], np.ndarray]] = {
    "gap": lambda r: r.gap.astype(float),
    "regret": cumulative_regret_curve,
    "unsafe_cum": cumulative_unsafe_curve,
}


@dataclass(frozen=True, eq=False)
class AggregateCurve:
    t: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n: int


def aggregate(records: Sequence[RunRecord], metric="gap") -> AggregateCurve:
    """Per-t mean and population standard deviation of a metric across runs.

    ``metric`` is a name from ``METRICS`` or a callable mapping a record to a
    per-t array. Rows are stacked in the given order, so results are stable
    for a fixed ordering.
    """
    records = list(records)
    if not records:
        raise ValueError("aggregate needs at least one record")
    horizons = {len(r) for r in records}
    if len(horizons) > 1:
        raise MixedHorizons(f"records have different lengths: {sorted(horizons)}")
    select = METRICS[metric] if isinstance(metric, str) else metric
    values = np.vstack([select(r) for r in records])
    return AggregateCurve(records[0].t.copy(), values.mean(axis=0), values.std(axis=0), len(records))
