"""Independent brute-force reference implementations used by the tests.

Nothing here imports the package's numerical code paths, so agreement with
these is a real check.
"""

import math

import numpy as np


def rbf(a, b, signal_variance, length_scale):
    return signal_variance * math.exp(-((a - b) ** 2) / (2.0 * length_scale**2))


def gram(xs, ys, signal_variance, length_scale):
    return np.array([[rbf(a, b, signal_variance, length_scale) for b in ys] for a in xs])


def direct_inverse_posterior(train_x, train_y, probe, signal_variance, length_scale, noise):
    """Posterior mean/variance by explicit matrix inversion."""
    if len(train_x) == 0:
        return np.zeros(len(probe)), np.full(len(probe), signal_variance)
    K = gram(train_x, train_x, signal_variance, length_scale) + noise * np.eye(len(train_x))
    Kinv = np.linalg.inv(K)
    ks = gram(train_x, probe, signal_variance, length_scale)
    mean = ks.T @ Kinv @ np.asarray(train_y)
    var = np.array([signal_variance - ks[:, j] @ Kinv @ ks[:, j] for j in range(len(probe))])
    return mean, var


def safe_set_scan(lower, h):
    return {i for i in range(len(lower)) if lower[i] >= h}


def expanders_scan(grid, upper, safe, L, h):
    out = set()
    for i in safe:
        count = 0
        for j in range(len(grid)):
            if j in safe:
                continue
            if upper[i] - L * abs(grid[i] - grid[j]) >= h:
                count += 1
        if count > 0:
            out.add(i)
    return out


def maximizers_scan(lower, upper, safe):
    if not safe:
        return set()
    best = max(lower[i] for i in safe)
    return {i for i in safe if upper[i] >= best}


def after_change_scan(lower, B, h):
    return {i for i in range(len(lower)) if lower[i] - B >= h}


def maximal_runs(indices):
    runs, current = [], []
    for i in sorted(indices):
        if current and i == current[-1] + 1:
            current.append(i)
        else:
            if current:
                runs.append(current)
            current = [i]
    if current:
        runs.append(current)
    return runs
