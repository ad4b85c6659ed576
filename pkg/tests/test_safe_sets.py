import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safeswitch.gp_core import ConfidenceBand
from safeswitch.safe_sets import (
    compute_expanders,
    compute_maximizers,
    compute_safe_set,
    safe_set_after_change,
    safeopt_sets,
)

from oracles import after_change_scan, expanders_scan, maximizers_scan, safe_set_scan

GRID = np.linspace(-5, 5, 101)


def make_band(mean, std, beta=2.0, grid=GRID):
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    return ConfidenceBand(grid, mean, std, mean - beta * std, mean + beta * std, beta)


def random_band(rng, n=101):
    grid = np.linspace(-5, 5, n)
    mean = rng.normal(0, 1.5, n)
    std = rng.uniform(0, 1, n)
    return make_band(mean, std, rng.uniform(0, 3), grid)


def as_set(a):
    return set(int(i) for i in a)


def test_safe_set_threshold_inclusive():
    band = make_band([0.0, 1.0, -0.5], [0.0, 0.2, 0.0], grid=np.array([0.0, 1.0, 2.0]))
    assert as_set(compute_safe_set(band, 0.0)) == {0, 1}


def test_expanders_empty_when_everything_safe():
    band = make_band(np.full(101, 5.0), np.full(101, 0.1))
    safe = compute_safe_set(band, 0.0)
    assert len(safe) == 101
    assert compute_expanders(band, safe, 4.0, 0.0).size == 0


def test_expanders_boundary_upper_equals_h():
    # the cone only reaches h at distance 0, which is the point itself
    grid = np.linspace(0, 1, 5)
    band = ConfidenceBand(grid, np.zeros(5), np.zeros(5), np.zeros(5), np.zeros(5), 0.0)
    assert compute_expanders(band, [2], 1.0, 0.0).size == 0


def test_expanders_reach_neighbour():
    grid = np.linspace(0, 1, 5)
    upper = np.array([-1.0, -1.0, 1.0, -1.0, -1.0])
    band = ConfidenceBand(grid, upper - 1, np.full(5, 0.5), upper - 2, upper, 1.0)
    # reach is 1.0 / L; spacing is 0.25
    assert as_set(compute_expanders(band, [2], 3.9, 0.0)) == {2}
    assert compute_expanders(band, [2], 4.1, 0.0).size == 0


def test_maximizers_single_safe_point():
    band = random_band(np.random.default_rng(0))
    assert as_set(compute_maximizers(band, [17])) == {17}


def test_maximizers_zero_beta_is_argmax_mean():
    rng = np.random.default_rng(1)
    band = make_band(rng.normal(size=101), rng.uniform(0, 1, 101), beta=0.0)
    safe = np.arange(20, 60)
    expected = 20 + int(np.argmax(band.mean[20:60]))
    assert as_set(compute_maximizers(band, safe)) == {expected}


def test_maximizers_empty_safe():
    band = random_band(np.random.default_rng(2))
    assert compute_maximizers(band, []).size == 0


def test_after_change_with_zero_bound_matches_safe_set():
    band = random_band(np.random.default_rng(3))
    np.testing.assert_array_equal(safe_set_after_change(band, 0.0, 0.1),
                                  compute_safe_set(band, 0.1))


def test_safeopt_sets_override_and_widths():
    band = random_band(np.random.default_rng(4))
    sets = safeopt_sets(band, 0.0, 4.0, safe=[5, 3, 3])
    np.testing.assert_array_equal(sets.safe, [3, 5])
    np.testing.assert_array_equal(sets.widths, band.upper - band.lower)
    assert as_set(sets.candidates) == as_set(sets.expanders) | as_set(sets.maximizers)


def test_brute_force_agreement_on_many_bands():
    rng = np.random.default_rng(20240611)
    for _ in range(100):
        band = random_band(rng)
        h = rng.uniform(-1, 1)
        L = rng.uniform(0.5, 8)
        B = rng.uniform(0, 2)
        safe = compute_safe_set(band, h)
        ref_safe = safe_set_scan(band.lower, h)
        assert as_set(safe) == ref_safe
        assert as_set(compute_expanders(band, safe, L, h)) == expanders_scan(GRID, band.upper, ref_safe, L, h)
        assert as_set(compute_maximizers(band, safe)) == maximizers_scan(band.lower, band.upper, ref_safe)
        assert as_set(safe_set_after_change(band, B, h)) == after_change_scan(band.lower, B, h)


bands = st.builds(
    lambda seed, n: random_band(np.random.default_rng(seed), n),
    st.integers(0, 2**32 - 1),
    st.integers(2, 60),
)


@settings(max_examples=80, deadline=None)
@given(bands, st.floats(-2, 2), st.floats(0.1, 10))
def test_subset_invariants(band, h, L):
    sets = safeopt_sets(band, h, L)
    safe = as_set(sets.safe)
    assert as_set(sets.expanders) <= safe
    assert as_set(sets.maximizers) <= safe
    if safe:
        assert sets.maximizers.size > 0


@settings(max_examples=80, deadline=None)
@given(bands, st.floats(-2, 2), st.floats(-2, 2))
def test_safe_set_monotone_in_threshold(band, h1, h2):
    lo, hi = sorted((h1, h2))
    assert as_set(compute_safe_set(band, hi)) <= as_set(compute_safe_set(band, lo))


@settings(max_examples=80, deadline=None)
@given(bands, st.floats(0, 3), st.floats(-2, 2))
def test_after_change_is_subset(band, B, h):
    assert as_set(safe_set_after_change(band, B, h)) <= as_set(compute_safe_set(band, h))


@pytest.mark.parametrize("n", [1, 2])
def test_tiny_grids(n):
    grid = np.linspace(0, 1, n)
    band = make_band(np.ones(n), np.zeros(n), grid=grid)
    sets = safeopt_sets(band, 0.0, 1.0)
    assert sets.safe.size == n and sets.expanders.size == 0
