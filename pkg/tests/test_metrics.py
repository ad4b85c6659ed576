import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safeswitch.environment import DomainGrid, FunctionTable, SwitchingEnvironment
from safeswitch.metrics import (
    HorizonExceedsTrace,
    MixedHorizons,
    Row,
    RunRecord,
    aggregate,
    cumulative_regret_curve,
    cumulative_unsafe_curve,
    detection_stats,
    filter_local_maxima_runs,
    instantaneous_gap,
    normalized_regret,
    unsafe_count,
)


def record(gaps=None, unsafe=None, declared=None, policy="p", pair=0):
    n = len(gaps if gaps is not None else unsafe if unsafe is not None else declared)
    gaps = [0.0] * n if gaps is None else gaps
    unsafe = [False] * n if unsafe is None else unsafe
    declared = [False] * n if declared is None else declared
    rows = [Row(t, 0.0, -g, -1.0 if u else 1.0, g, u, d, False)
            for t, (g, u, d) in enumerate(zip(gaps, unsafe, declared))]
    return RunRecord.from_rows(policy, pair, None, rows)


def declared_at(times, n):
    return [t in times for t in range(n)]


def test_gap_examples():
    env = SwitchingEnvironment(DomainGrid(0, 2, 3), [FunctionTable(np.array([0.0, 2.0, 1.0]))])
    assert instantaneous_gap(env, 0, 2.0) == 0.0
    assert instantaneous_gap(env, 7, 1.5) == 0.5
    assert instantaneous_gap(env, 0, 2.5) == -0.5


def test_regret_examples():
    assert normalized_regret(record([0.0] * 5), 5) == 0.0
    assert normalized_regret(record([1.0] * 4), 4) == 1.0
    assert normalized_regret(record([1.0, 3.0, 100.0]), 2) == 2.0
    with pytest.raises(HorizonExceedsTrace):
        normalized_regret(record([1.0] * 4), 5)


def test_unsafe_examples():
    assert unsafe_count(record(unsafe=[False] * 6), 6) == 0
    assert unsafe_count(record(unsafe=[False, True, True]), 3) == 2
    with pytest.raises(HorizonExceedsTrace):
        unsafe_count(record(unsafe=[False]), 2)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=60), st.data())
def test_regret_against_summation_oracle(gaps, data):
    T = data.draw(st.integers(1, len(gaps)))
    rec = record(gaps)
    assert normalized_regret(rec, T) == pytest.approx(math.fsum(gaps[:T]) / T, abs=1e-12)
    assert normalized_regret(rec, T) * T == pytest.approx(sum(gaps[:T]), abs=1e-9)
    np.testing.assert_allclose(cumulative_regret_curve(rec)[T - 1], normalized_regret(rec, T))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=60))
def test_unsafe_against_counting_oracle(flags):
    rec = record(unsafe=flags)
    counts = [unsafe_count(rec, T) for T in range(len(flags) + 1)]
    assert counts == [sum(flags[:T]) for T in range(len(flags) + 1)]
    assert all(a <= b for a, b in zip(counts, counts[1:]))
    np.testing.assert_array_equal(cumulative_unsafe_curve(rec), counts[1:])


def test_detection_examples():
    assert detection_stats(record(declared=declared_at({150}, 300)), [150]).delays == (0,)
    none = detection_stats(record(declared=[False] * 300), [150])
    assert none.delays == (None,) and none.false_declarations == 0 and none.missed == 1
    stats = detection_stats(record(declared=declared_at({40, 150, 160}, 300)), [150])
    assert stats.delays == (0,)
    assert stats.false_declarations == 2


def test_detection_multiple_changes():
    stats = detection_stats(record(declared=declared_at({12, 35, 36}, 60)), [10, 30, 50])
    assert stats.delays == (2, 5, None)
    assert stats.false_declarations == 1
    assert stats.missed == 1


def test_filter_examples():
    converged = record([2.0] * 30 + [0.0] * 20, pair=0)
    trapped = record([2.0] * 30 + [1.5] * 20, pair=1)
    kept, excluded = filter_local_maxima_runs([converged, trapped], 20, 0.25)
    assert kept == [converged] and excluded == [trapped]
    with pytest.raises(ValueError):
        filter_local_maxima_runs([converged], 0, 0.25)


def test_filter_matches_known_labels():
    rng = np.random.default_rng(17)
    recs, labels = [], []
    for i in range(40):
        trapped = bool(rng.integers(2))
        tail = rng.uniform(0.5, 2.0) if trapped else rng.uniform(0.0, 0.1)
        gaps = list(rng.uniform(0, 3, 80)) + [tail] * 20
        recs.append(record(gaps, pair=i))
        labels.append(trapped)
    kept, excluded = filter_local_maxima_runs(recs)
    assert [r.pair for r in excluded] == [i for i, lab in enumerate(labels) if lab]
    assert len(kept) + len(excluded) == 40


def test_aggregate_examples():
    single = aggregate([record([1.0, 2.0, 3.0])])
    np.testing.assert_array_equal(single.mean, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(single.std, [0.0, 0.0, 0.0])
    pair = aggregate([record([0.0] * 4), record([2.0] * 4)])
    np.testing.assert_array_equal(pair.mean, [1.0] * 4)
    np.testing.assert_array_equal(pair.std, [1.0] * 4)
    assert pair.n == 2
    with pytest.raises(MixedHorizons):
        aggregate([record([0.0] * 4), record([0.0] * 5)])
    with pytest.raises(ValueError):
        aggregate([])


def test_aggregate_against_two_pass_oracle():
    rng = np.random.default_rng(31)
    recs = [record(list(rng.normal(size=25)), pair=i) for i in range(17)]
    curve = aggregate(recs, "gap")
    for t in range(25):
        col = [r.gap[t] for r in recs]
        mean = math.fsum(col) / len(col)
        std = math.sqrt(math.fsum((c - mean) ** 2 for c in col) / len(col))
        assert curve.mean[t] == pytest.approx(mean, abs=1e-10)
        assert curve.std[t] == pytest.approx(std, abs=1e-10)


def test_rows_round_trip_and_purity():
    rec = record([0.5, 0.25], unsafe=[True, False], declared=[False, True])
    again = RunRecord.from_rows(rec.policy, rec.pair, rec.seed, rec.rows)
    assert again.rows == rec.rows
    assert rec.declaration_times() == [1]
    assert normalized_regret(again, 2) == normalized_regret(rec, 2)
    assert unsafe_count(again, 2) == unsafe_count(rec, 2) == 1
