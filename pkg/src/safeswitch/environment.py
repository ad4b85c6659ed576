"""Switching environments built from GP-prior samples on a uniform 1-D grid."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .gp_core import KernelHyper, kernel_matrix, stable_cholesky


class OffGridQuery(ValueError):
    pass


class EmptySafeSet(ValueError):
    pass


class RejectionBudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class DomainGrid:
    x_min: float = -5.0
    x_max: float = 5.0
    n_points: int = 101

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError(f"n_points must be >= 2, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    def index_of(self, x: float) -> int:
        pos = (x - self.x_min) / self.spacing
        idx = int(round(pos))
        if not (0 <= idx < self.n_points) or abs(pos - idx) > 1e-6:
            raise OffGridQuery(f"{x!r} is not a point of {self}")
        return idx

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n_points": self.n_points}


@dataclass(frozen=True, eq=False)
class FunctionTable:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise ValueError("function table has non-finite values")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, idx):
        return self.values[idx]


def sample_gp_function(
    grid: DomainGrid, hyper: KernelHyper, rng: np.random.Generator
) -> FunctionTable:
    """One joint draw of a zero-mean GP on the grid points."""
    chol = _grid_cholesky(grid, hyper)
    return FunctionTable(chol @ rng.standard_normal(grid.n_points))


def _grid_cholesky(grid: DomainGrid, hyper: KernelHyper) -> np.ndarray:
    chol, _ = stable_cholesky(kernel_matrix(grid.points, grid.points, hyper), hyper.jitter)
    return chol


def sample_pieces(
    grid: DomainGrid,
    hyper: KernelHyper,
    n_pieces: int,
    bound_b: float,
    seed_point: float,
    rng: np.random.Generator,
    *,
    threshold: float = 0.0,
    seed_margin: float = 0.2,
    perturbation_variance: float = 0.04,
    max_attempts: int = 10_000,
) -> list[FunctionTable]:
    """Draw a chain of tables ``f_{k+1} = f_k + d_k`` by rejection.

    ``f_1`` is a draw from the GP prior and each ``d_k`` a draw from the same
    kernel rescaled to ``perturbation_variance``. A chain is accepted when every
    piece exceeds ``threshold + seed_margin`` at ``seed_point`` and consecutive
    pieces differ by at most ``bound_b`` everywhere.
    """
    if bound_b <= 0:
        raise ValueError(f"bound_b must be > 0, got {bound_b}")
    if perturbation_variance < 0:
        raise ValueError("perturbation_variance must be >= 0")
    seed_idx = grid.index_of(seed_point)
    chol = _grid_cholesky(grid, hyper)
    # same correlation structure, perturbation only rescales the draw
    scale = np.sqrt(perturbation_variance / hyper.signal_variance)
    floor = threshold + seed_margin
    for _ in range(max_attempts):
        pieces = [chol @ rng.standard_normal(grid.n_points)]
        for _ in range(n_pieces - 1):
            pieces.append(pieces[-1] + scale * (chol @ rng.standard_normal(grid.n_points)))
        if all(p[seed_idx] > floor for p in pieces) and all(
            np.max(np.abs(b - a)) <= bound_b for a, b in zip(pieces, pieces[1:])
        ):
            return [FunctionTable(p) for p in pieces]
    raise RejectionBudgetExhausted(
        f"no admissible function chain after {max_attempts} attempts "
        f"(bound_b={bound_b}, perturbation_variance={perturbation_variance})"
    )


def sample_function_pair(
    grid: DomainGrid,
    hyper: KernelHyper,
    bound_b: float,
    seed_point: float,
    rng: np.random.Generator,
    **kwargs,
) -> tuple[FunctionTable, FunctionTable]:
    f1, f2 = sample_pieces(grid, hyper, 2, bound_b, seed_point, rng, **kwargs)
    return f1, f2


def _runs(indices: np.ndarray) -> list[np.ndarray]:
    if indices.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(indices) > 1) + 1
    return np.split(indices, breaks)


@dataclass(frozen=True, eq=False)
class SwitchingEnvironment:
    grid: DomainGrid
    pieces: Sequence[FunctionTable]
    change_times: Sequence[int] = ()
    noise_variance: float = 0.0
    bound_b: float = 1.0
    threshold: float = 0.0
    lipschitz: float = 4.5
    seed_point: float = 0.0
    generator_seed: int | None = None
    _points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "change_times", tuple(int(t) for t in self.change_times))
        object.__setattr__(self, "_points", self.grid.points)
        if len(self.pieces) != len(self.change_times) + 1:
            raise ValueError(
                f"{len(self.pieces)} pieces need {len(self.pieces) - 1} change times, "
                f"got {len(self.change_times)}"
            )
        if any(b <= a for a, b in zip(self.change_times, self.change_times[1:])):
            raise ValueError("change_times must be strictly increasing")
        if any(len(p) != self.grid.n_points for p in self.pieces):
            raise ValueError("every piece must have one value per grid point")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")

    @property
    def points(self) -> np.ndarray:
        return self._points

    def active(self, t: int) -> int:
        """Index of the piece in force at time ``t``."""
        return sum(1 for tc in self.change_times if tc <= t)

    def table(self, t: int) -> np.ndarray:
        return self.pieces[self.active(t)].values

    def value(self, x: float, t: int) -> float:
        return float(self.table(t)[self.grid.index_of(x)])

    def observe(self, x: float, t: int, rng: np.random.Generator) -> float:
        f = self.value(x, t)
        if self.noise_variance == 0:
            return f
        return f + float(rng.normal(0.0, np.sqrt(self.noise_variance)))

    def true_safe_set(self, t: int) -> np.ndarray:
        return np.flatnonzero(self.table(t) >= self.threshold)

    def safe_seed_indices(self, t: int) -> list[int]:
        """Lower-median index of every maximal run of truly safe grid points."""
        runs = _runs(self.true_safe_set(t))
        if not runs:
            raise EmptySafeSet(f"no grid point is safe at t={t}")
        return [int(run[(len(run) - 1) // 2]) for run in runs]

    def safe_seed_set(self, t: int) -> list[float]:
        return [float(self._points[i]) for i in self.safe_seed_indices(t)]

    def global_max(self, t: int) -> float:
        return float(np.max(self.table(t)))

    def empirical_lipschitz(self) -> float:
        """Largest finite-difference slope over all pieces."""
        return max(
            float(np.max(np.abs(np.diff(p.values)))) / self.grid.spacing for p in self.pieces
        )

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "pieces": [p.values.tolist() for p in self.pieces],
            "change_times": list(self.change_times),
            "noise_variance": self.noise_variance,
            "bound_b": self.bound_b,
            "threshold": self.threshold,
            "lipschitz": self.lipschitz,
            "seed_point": self.seed_point,
            "generator_seed": self.generator_seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SwitchingEnvironment":
        g = doc["grid"]
        return cls(
            grid=DomainGrid(float(g["x_min"]), float(g["x_max"]), int(g["n_points"])),
            pieces=[FunctionTable(np.array(p, dtype=float)) for p in doc["pieces"]],
            change_times=doc["change_times"],
            noise_variance=float(doc["noise_variance"]),
            bound_b=float(doc["bound_b"]),
            threshold=float(doc["threshold"]),
            lipschitz=float(doc["lipschitz"]),
            seed_point=float(doc.get("seed_point", 0.0)),
            generator_seed=doc.get("generator_seed"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SwitchingEnvironment":
        return cls.from_dict(json.loads(text))


def save_environments(envs: Sequence[SwitchingEnvironment], path) -> Path:
    path = Path(path)
    docs = [env.to_dict() for env in envs]
    path.write_text(json.dumps(docs, indent=1) + "\n", encoding="utf-8")
    return path


def load_environments(path) -> list[SwitchingEnvironment]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, dict):
        doc = [doc]
    return [SwitchingEnvironment.from_dict(d) for d in doc]
