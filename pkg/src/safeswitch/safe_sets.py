"""SafeOpt set computations on a gridded confidence band.

All sets are returned as sorted integer arrays of grid indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gp_core import ConfidenceBand


def _as_indices(idx) -> np.ndarray:
    if not isinstance(idx, np.ndarray):
        idx = list(idx)
    return np.unique(np.asarray(idx, dtype=int))


@dataclass(frozen=True, eq=False)
class SafeOptSets:
    safe: np.ndarray
    expanders: np.ndarray
    maximizers: np.ndarray
    widths: np.ndarray

    @property
    def candidates(self) -> np.ndarray:
        """Union of expanders and maximizers."""
        return np.union1d(self.expanders, self.maximizers)


def compute_safe_set(band: ConfidenceBand, h: float) -> np.ndarray:
    return np.flatnonzero(band.lower >= h)


def compute_expanders(band: ConfidenceBand, safe, lipschitz: float, h: float) -> np.ndarray:
    """Safe points whose optimistic Lipschitz cone clears ``h`` at some unsafe point."""
    safe = _as_indices(safe)
    outside = np.setdiff1d(np.arange(len(band)), safe)
    if safe.size == 0 or outside.size == 0:
        return np.zeros(0, dtype=int)
    dist = np.abs(band.grid[safe, None] - band.grid[None, outside])
    psi = np.count_nonzero(band.upper[safe, None] - lipschitz * dist >= h, axis=1)
    return safe[psi > 0]


def compute_maximizers(band: ConfidenceBand, safe) -> np.ndarray:
    safe = _as_indices(safe)
    if safe.size == 0:
        return safe
    best_lower = band.lower[safe].max()
    return safe[band.upper[safe] >= best_lower]


def safe_set_after_change(prev_band: ConfidenceBand, bound_b: float, h: float) -> np.ndarray:
    """Points still certified safe if the function may have dropped by ``bound_b``."""
    return np.flatnonzero(prev_band.lower - bound_b >= h)


def safeopt_sets(band: ConfidenceBand, h: float, lipschitz: float, safe=None) -> SafeOptSets:
    """S, G, M and widths from ``band``; ``safe`` overrides the band's own safe set."""
    safe = compute_safe_set(band, h) if safe is None else _as_indices(safe)
    return SafeOptSets(
        safe=safe,
        expanders=compute_expanders(band, safe, lipschitz, h),
        maximizers=compute_maximizers(band, safe),
        widths=band.width,
    )
