"""Experiment configuration and the two standard presets."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .environment import DomainGrid
from .gp_core import KernelHyper
from .policies import POLICY_IDS, PolicyConfig

DEFAULT_POLICIES = tuple(p for p in POLICY_IDS if p != "safeopt")

# overrides applied on top of the defaults (which already are the full-scale setup)
PRESETS: dict[str, dict] = {
    "paper": {},
    "desk": {"n_pairs": 100, "horizon": 100, "change_times": (50,), "n_points": 101},
}


@dataclass(frozen=True)
class ExperimentConfig:
    # domain grid
    x_min: float = -5.0
    x_max: float = 5.0
    n_points: int = 101
    # GP prior used both to generate functions and inside the policies
    signal_variance: float = 2.0
    length_scale: float = 1.0
    jitter: float = 1e-9
    noise_variance: float = 0.0
    # switching environment
    bound_b: float = 1.0
    threshold: float = 0.0
    lipschitz: float = 4.5
    seed_point: float = 0.0
    seed_margin: float = 0.2
    perturbation_variance: float = 0.04
    max_attempts: int = 10_000
    # policies
    beta: float = 2.0
    epsilon: float = 0.1
    window_min: int = 1
    window_max: int = 300
    window_increment: int = 1
    changedetection_delay: int = 20
    fixed_window: int = 30
    fallback_rule: str = "max_lower"
    # experiment
    horizon: int = 300
    change_times: tuple[int, ...] = (150,)
    n_pairs: int = 500
    policies: tuple[str, ...] = DEFAULT_POLICIES
    master_seed: int = 0
    delta: float = 0.05
    tail_len: int = 20
    tol: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "change_times", tuple(int(t) for t in self.change_times))
        object.__setattr__(self, "policies", tuple(self.policies))
        ct = self.change_times
        if any(b <= a for a, b in zip(ct, ct[1:])):
            raise ValueError(f"change_times must be strictly increasing, got {ct}")
        if any(t < 0 or t >= self.horizon for t in ct):
            raise ValueError(f"change_times must lie in [0, horizon={self.horizon}), got {ct}")
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        unknown = [p for p in self.policies if p not in POLICY_IDS]
        if unknown:
            raise ValueError(f"unknown policies {unknown}; expected a subset of {POLICY_IDS}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        # surface invalid values early, with the component's own message
        self.grid(), self.kernel(), self.policy_config()

    def grid(self) -> DomainGrid:
        return DomainGrid(self.x_min, self.x_max, self.n_points)

    def kernel(self) -> KernelHyper:
        return KernelHyper(self.signal_variance, self.length_scale, self.jitter)

    def policy_config(self) -> PolicyConfig:
        return PolicyConfig(
            beta=self.beta,
            epsilon=self.epsilon,
            h=self.threshold,
            lipschitz=self.lipschitz,
            bound_b=self.bound_b,
            window_min=self.window_min,
            window_max=self.window_max,
            window_increment=self.window_increment,
            changedetection_delay=self.changedetection_delay,
            noise_variance=self.noise_variance,
            fixed_window=self.fixed_window,
            fallback_rule=self.fallback_rule,
        )

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["change_times"] = list(self.change_times)
        doc["policies"] = list(self.policies)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - names)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**doc)

    @classmethod
    def preset(cls, name: str, **overrides) -> "ExperimentConfig":
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
        return cls(**{**PRESETS[name], **overrides})


def load_config(path) -> dict:
    """Raw key/value mapping from a JSON config file (validated on construction)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return doc


def save_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path
