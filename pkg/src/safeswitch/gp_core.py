"""Gaussian-process regression with a squared-exponential (RBF) kernel.

Everything here works on 1-D inputs. Posteriors are fitted from scratch by a
Cholesky factorization of ``K + (noise + jitter) I``; the jitter is doubled
until the factorization succeeds or the ceiling is hit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

MAX_JITTER = 1e-3


class FactorizationFailure(LinAlgError):
    """Kernel matrix stayed numerically indefinite up to the jitter ceiling."""


@dataclass(frozen=True)
class KernelHyper:
    signal_variance: float = 2.0
    length_scale: float = 1.0
    jitter: float = 1e-9

    def __post_init__(self):
        if not self.signal_variance > 0:
            raise ValueError(f"signal_variance must be > 0, got {self.signal_variance}")
        if not self.length_scale > 0:
            raise ValueError(f"length_scale must be > 0, got {self.length_scale}")
        if not self.jitter >= 0:
            raise ValueError(f"jitter must be >= 0, got {self.jitter}")


@dataclass(frozen=True)
class Observation:
    x: float
    y: float
    t: int = 0


def rbf_kernel(x1, x2, hyper: KernelHyper):
    """``signal_variance * exp(-(x1 - x2)^2 / (2 length_scale^2))``.

    Broadcasts, so scalars give a float and arrays give an array.
    """
    d = np.subtract(x1, x2, dtype=float)
    k = hyper.signal_variance * np.exp(-0.5 * (d / hyper.length_scale) ** 2)
    return float(k) if np.ndim(k) == 0 else k


def kernel_matrix(a, b, hyper: KernelHyper) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    return rbf_kernel(a[:, None], b[None, :], hyper)


def stable_cholesky(
    matrix: np.ndarray, jitter: float, max_jitter: float = MAX_JITTER
) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``matrix + jitter I``, doubling jitter on failure.

    Returns the factor and the jitter that was actually added.
    """
    n = matrix.shape[0]
    if n == 0:
        return np.zeros((0, 0)), jitter
    eye = np.eye(n)
    current = jitter
    while True:
        try:
            chol = cholesky(matrix + current * eye, lower=True, check_finite=False)
            if np.all(np.isfinite(chol)):
                return chol, current
        except LinAlgError:
            pass
        if current >= max_jitter:
            raise FactorizationFailure(
                f"matrix of size {n} not positive definite with jitter {current:g}"
            )
        # a zero starting jitter can never double its way up
        current = min(max(2.0 * current, 1e-12), max_jitter)


@dataclass(frozen=True, eq=False)
class GpPosterior:
    train_x: np.ndarray
    train_y: np.ndarray
    noise_variance: float
    hyper: KernelHyper
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = field(default=0.0)

    @property
    def n(self) -> int:
        return self.train_x.shape[0]

    def predict(self, x):
        """Posterior mean and (clamped) variance of the latent function at ``x``."""
        xs = np.asarray(x, dtype=float)
        scalar = xs.ndim == 0
        xs = xs.reshape(-1)
        prior_var = np.full(xs.shape, self.hyper.signal_variance)
        if self.n == 0:
            mean, var = np.zeros(xs.shape), prior_var
        else:
            k_star = kernel_matrix(self.train_x, xs, self.hyper)
            mean = k_star.T @ self.alpha
            v = solve_triangular(self.chol, k_star, lower=True, check_finite=False)
            var = np.maximum(prior_var - np.einsum("ij,ij->j", v, v), 0.0)
        if scalar:
            return float(mean[0]), float(var[0])
        return mean, var

    def covariance(self, a, b) -> np.ndarray:
        """Posterior covariance ``k(a, b) - k_t(a)^T (K + s^2 I)^-1 k_t(b)``."""
        prior = kernel_matrix(a, b, self.hyper)
        if self.n == 0:
            return prior
        va = solve_triangular(
            self.chol, kernel_matrix(self.train_x, a, self.hyper), lower=True
        )
        vb = solve_triangular(
            self.chol, kernel_matrix(self.train_x, b, self.hyper), lower=True
        )
        return prior - va.T @ vb


def fit_arrays(
    x: Sequence[float],
    y: Sequence[float],
    hyper: KernelHyper,
    noise_variance: float,
    max_jitter: float = MAX_JITTER,
) -> GpPosterior:
    if noise_variance < 0:
        raise ValueError(f"noise_variance must be >= 0, got {noise_variance}")
    xs = np.array(x, dtype=float).reshape(-1)
    ys = np.array(y, dtype=float).reshape(-1)
    if xs.shape != ys.shape:
        raise ValueError(f"got {xs.size} inputs but {ys.size} targets")
    gram = kernel_matrix(xs, xs, hyper)
    gram[np.diag_indices_from(gram)] += noise_variance
    chol, used = stable_cholesky(gram, hyper.jitter, max_jitter)
    alpha = cho_solve((chol, True), ys, check_finite=False) if xs.size else np.zeros(0)
    return GpPosterior(xs, ys, float(noise_variance), hyper, chol, alpha, used)


def fit_posterior(
    observations: Iterable[Observation], hyper: KernelHyper, noise_variance: float
) -> GpPosterior:
    obs = list(observations)
    return fit_arrays([o.x for o in obs], [o.y for o in obs], hyper, noise_variance)


def predict(post: GpPosterior, x):
    return post.predict(x)


@dataclass(frozen=True, eq=False)
class ConfidenceBand:
    grid: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    beta: float

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def __len__(self):
        return self.grid.shape[0]


def confidence_band(post: GpPosterior, grid, beta: float) -> ConfidenceBand:
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    mean, var = post.predict(grid)
    std = np.sqrt(var)
    return ConfidenceBand(grid, mean, std, mean - beta * std, mean + beta * std, float(beta))
