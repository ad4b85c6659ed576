"""Decision policies for safe optimization of a switching function.

Every policy owns a GP over its training window and exposes ``step(t)``,
which picks a grid point, queries the environment through the ``observe``
callback, updates its state and returns a :class:`StepDecision`.

Training data is a single history list. Positions in it are 1-based when
talking about ``changepoint_index`` so that the loop bookkeeping reads the
same as the textbook pseudo-code (``start = max(p - window, changepoint_index)``
with ``p`` the position of the newest point).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .gp_core import ConfidenceBand, KernelHyper, confidence_band, fit_arrays
from .safe_sets import (
    SafeOptSets,
    compute_expanders,
    compute_maximizers,
    safe_set_after_change,
    safeopt_sets,
)

POLICY_IDS = (
    "adaptive_safeopt",
    "fixed_window",
    "genie_cp_ss",
    "genie_cp",
    "genie_ss",
    "gp_ucb_cp",
    "safeopt",
)
# policies handed the full true seed set rather than the single seed point
SEED_SET_POLICIES = frozenset({"genie_cp_ss", "genie_ss"})
FALLBACK_RULES = ("max_lower", "max_upper")

Observer = Callable[[float, int], float]
SeedOracle = Callable[[int], Sequence[float]]


class EmptySelection(RuntimeError):
    pass


class UnsafeSeed(ValueError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    beta: float = 2.0
    epsilon: float = 0.1
    h: float = 0.0
    lipschitz: float = 4.5
    bound_b: float = 1.0
    window_min: int = 1
    window_max: int = 300
    window_increment: int = 1
    changedetection_delay: int = 20
    noise_variance: float = 0.0
    fixed_window: int = 30
    fallback_rule: str = "max_lower"

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.lipschitz <= 0 or self.bound_b <= 0:
            raise ValueError("lipschitz and bound_b must be > 0")
        if not 1 <= self.window_min <= self.window_max:
            raise ValueError("need 1 <= window_min <= window_max")
        if self.window_increment < 1 or self.fixed_window < 1:
            raise ValueError("window_increment and fixed_window must be >= 1")
        if self.changedetection_delay < 0 or self.noise_variance < 0:
            raise ValueError("changedetection_delay and noise_variance must be >= 0")
        if self.fallback_rule not in FALLBACK_RULES:
            raise ValueError(f"fallback_rule must be one of {FALLBACK_RULES}")


@dataclass
class PolicyState:
    history_x: list[float] = field(default_factory=list)
    history_y: list[float] = field(default_factory=list)
    window: int = 1
    counter: int = 0
    changepoint_index: int = 1
    delaychangedetection_flag: bool = True
    changepoint_flag: bool = False
    band: ConfidenceBand | None = None
    last_band: ConfidenceBand | None = None
    # 0-based offset into the history of the current training slice
    train_start: int = 0
    # genie_cp: safe set pinned to a single index for the next step
    forced_safe: int | None = None
    seeking_safe: bool = False

    @property
    def train_x(self) -> list[float]:
        return self.history_x[self.train_start :]

    @property
    def train_y(self) -> list[float]:
        return self.history_y[self.train_start :]


@dataclass(frozen=True, eq=False)
class StepDecision:
    t: int
    chosen_index: int
    chosen_x: float
    y: float
    declared_change: bool
    used_fallback: bool
    sets_snapshot: SafeOptSets


def detect_change(band: ConfidenceBand, x_t: float, y_t: float) -> bool:
    """True when ``y_t`` falls outside the band at grid point ``x_t``."""
    idx = int(np.argmin(np.abs(band.grid - x_t)))
    return _outside(band, idx, y_t)


def _outside(band: ConfidenceBand, idx: int, y: float) -> bool:
    return bool(y < band.lower[idx] or y > band.upper[idx])


def _argmax_over(values: np.ndarray, candidates: np.ndarray) -> int:
    # np.argmax returns the first hit; candidates are sorted so lowest index wins
    return int(candidates[np.argmax(values[candidates])])


def _argmin_over(values: np.ndarray, candidates: np.ndarray) -> int:
    return int(candidates[np.argmin(values[candidates])])


def _fallback(band: ConfidenceBand, rule: str) -> int:
    if len(band) == 0:
        raise EmptySelection("empty grid")
    return int(np.argmax(band.lower if rule == "max_lower" else band.upper))


class Policy:
    """Plain SafeOpt on all data: ``argmax`` width over expanders and maximizers."""

    policy_id = "safeopt"

    def __init__(
        self,
        cfg: PolicyConfig,
        points: np.ndarray,
        hyper: KernelHyper,
        seeds: Sequence[float],
        observe: Observer,
        rng: np.random.Generator,
        *,
        change_times: Sequence[int] = (),
        seed_oracle: SeedOracle | None = None,
    ):
        self.cfg = cfg
        self.points = np.asarray(points, dtype=float)
        self.hyper = hyper
        self.observe = observe
        self.rng = rng
        self.change_times = frozenset(int(t) for t in change_times)
        self.seed_oracle = seed_oracle
        self.state = PolicyState(window=cfg.window_min)
        self._observe_seeds(seeds, 0)
        self._refit()

    # -- data handling -------------------------------------------------

    def _observe_seeds(self, seeds: Sequence[float], t: int) -> None:
        for x in seeds:
            self._append(float(x), self.observe(float(x), t))

    def _append(self, x: float, y: float) -> None:
        self.state.history_x.append(x)
        self.state.history_y.append(y)

    def _reset_history(self) -> None:
        self.state.history_x.clear()
        self.state.history_y.clear()
        self.state.train_start = 0

    def _training_start(self) -> int:
        return 0

    def _refit(self) -> None:
        st = self.state
        st.train_start = self._training_start()
        post = fit_arrays(st.train_x, st.train_y, self.hyper, self.cfg.noise_variance)
        st.last_band = st.band
        st.band = confidence_band(post, self.points, self.cfg.beta)

    # -- selection -----------------------------------------------------

    def _sets(self, band: ConfidenceBand) -> SafeOptSets:
        return safeopt_sets(band, self.cfg.h, self.cfg.lipschitz)

    def _select_safeopt(self, sets: SafeOptSets, band: ConfidenceBand) -> tuple[int, bool]:
        if sets.safe.size == 0:
            return _fallback(band, self.cfg.fallback_rule), True
        return _argmax_over(band.width, sets.candidates), False

    def _decide(self, t, idx, y, sets, declared=False, fallback=False) -> StepDecision:
        return StepDecision(t, idx, float(self.points[idx]), y, declared, fallback, sets)

    def step(self, t: int) -> StepDecision:
        band = self.state.band
        sets = self._sets(band)
        idx, fallback = self._select_safeopt(sets, band)
        y = self.observe(float(self.points[idx]), t)
        self._append(float(self.points[idx]), y)
        self._refit()
        return self._decide(t, idx, y, sets, fallback=fallback)


SafeOpt = Policy


class FixedWindowSafeOpt(Policy):
    """SafeOpt refitted on the most recent ``cfg.fixed_window`` observations."""

    policy_id = "fixed_window"

    def _training_start(self) -> int:
        return max(len(self.state.history_x) - self.cfg.fixed_window, 0)


class AdaptiveSafeOpt(Policy):
    """SafeOpt with band-violation change detection and an adaptive data window.

    After a declared change the next step draws its safe set from the band
    computed before the change, shrunk by the switch bound ``B``. Change
    detection is suspended for ``changedetection_delay`` steps after start-up
    and after every declaration.
    """

    policy_id = "adaptive_safeopt"

    def _training_start(self) -> int:
        st = self.state
        newest = len(st.history_x)
        return max(newest - st.window, st.changepoint_index) - 1

    def _step_sets(self, band: ConfidenceBand) -> SafeOptSets:
        st = self.state
        if not st.changepoint_flag:
            return self._sets(band)
        prev = st.last_band
        safe = safe_set_after_change(prev, self.cfg.bound_b, self.cfg.h)
        st.changepoint_flag = False
        return SafeOptSets(
            safe=safe,
            expanders=compute_expanders(prev, safe, self.cfg.lipschitz, self.cfg.h),
            maximizers=compute_maximizers(prev, safe),
            widths=band.width,
        )

    def _select(self, sets: SafeOptSets, band: ConfidenceBand) -> tuple[int, bool]:
        if self.state.delaychangedetection_flag:
            return self._select_safeopt(sets, band)
        explore = self.rng.random() < self.cfg.epsilon
        if sets.safe.size == 0:
            return _fallback(band, self.cfg.fallback_rule), True
        if explore:
            return _argmin_over(band.width, sets.safe), False
        return _argmax_over(band.width, sets.candidates), False

    def _grow_window(self) -> None:
        st = self.state
        st.window = min(st.window + self.cfg.window_increment, self.cfg.window_max)

    def _on_declaration(self, t: int) -> None:
        st = self.state
        st.window = self.cfg.window_min
        # position the point about to be appended will occupy
        st.changepoint_index = len(st.history_x) + 1
        st.delaychangedetection_flag = True
        st.changepoint_flag = True
        st.counter = 0

    def step(self, t: int) -> StepDecision:
        st = self.state
        band = st.band
        sets = self._step_sets(band)
        in_delay = st.delaychangedetection_flag
        idx, fallback = self._select(sets, band)
        x = float(self.points[idx])
        y = self.observe(x, t)

        declared = False
        if in_delay:
            self._grow_window()
            st.counter += 1
            # ">=" so that a zero delay still re-enables detection
            if st.counter >= self.cfg.changedetection_delay:
                st.counter = 0
                st.delaychangedetection_flag = False
        elif _outside(band, idx, y):
            declared = True
            self._on_declaration(t)
        else:
            self._grow_window()

        self._append(x, y)
        if declared:
            self._after_declaration(t)
        self._refit()
        return self._decide(t, idx, y, sets, declared, fallback)

    def _after_declaration(self, t: int) -> None:
        pass


class GenieSS(AdaptiveSafeOpt):
    """Adaptive-SafeOpt's detector, but a declared change re-seeds from the true safe set."""

    policy_id = "genie_ss"

    def _training_start(self) -> int:
        return 0

    def _on_declaration(self, t: int) -> None:
        super()._on_declaration(t)
        self.state.changepoint_flag = False

    def _after_declaration(self, t: int) -> None:
        self._reset_history()
        self.state.changepoint_index = 1
        self._observe_seeds(self.seed_oracle(t), t)


class GenieCPSS(Policy):
    """SafeOpt restarted from the true safe seed set at every known change time."""

    policy_id = "genie_cp_ss"

    def step(self, t: int) -> StepDecision:
        if t in self.change_times:
            self._reset_history()
            self._observe_seeds(self.seed_oracle(t), t)
            self._refit()
        return super().step(t)


class GenieCP(Policy):
    """Knows the change times only; re-seeds from its own first safe observation."""

    policy_id = "genie_cp"

    def _sets(self, band: ConfidenceBand) -> SafeOptSets:
        st = self.state
        if st.forced_safe is None:
            return super()._sets(band)
        safe = np.array([st.forced_safe])
        st.forced_safe = None
        return safeopt_sets(band, self.cfg.h, self.cfg.lipschitz, safe=safe)

    def step(self, t: int) -> StepDecision:
        st = self.state
        band = st.band
        if st.seeking_safe:
            sets = self._sets(band)
            idx, fallback = int(np.argmax(band.lower)), True
        else:
            sets = self._sets(band)
            idx, fallback = self._select_safeopt(sets, band)
        x = float(self.points[idx])
        y = self.observe(x, t)
        if t in self.change_times:
            self._reset_history()
            st.seeking_safe = True
        self._append(x, y)
        if st.seeking_safe and y >= self.cfg.h:
            st.seeking_safe = False
            st.forced_safe = idx
        self._refit()
        return self._decide(t, idx, y, sets, fallback=fallback)


class GpUcbCP(Policy):
    """Unconstrained GP-UCB, cleared at every known change time."""

    policy_id = "gp_ucb_cp"

    def __init__(self, cfg, points, hyper, seeds, observe, rng, **kwargs):
        # starts from the prior; seeds are a safety device it does not use
        super().__init__(cfg, points, hyper, (), observe, rng, **kwargs)

    def step(self, t: int) -> StepDecision:
        if t in self.change_times:
            self._reset_history()
            self._refit()
        band = self.state.band
        sets = self._sets(band)
        idx = int(np.argmax(band.upper))
        y = self.observe(float(self.points[idx]), t)
        self._append(float(self.points[idx]), y)
        self._refit()
        return self._decide(t, idx, y, sets)


POLICY_CLASSES: dict[str, type[Policy]] = {
    "adaptive_safeopt": AdaptiveSafeOpt,
    "fixed_window": FixedWindowSafeOpt,
    "genie_cp_ss": GenieCPSS,
    "genie_cp": GenieCP,
    "genie_ss": GenieSS,
    "gp_ucb_cp": GpUcbCP,
    "safeopt": SafeOpt,
}


def initialize_policy(
    policy_id: str,
    cfg: PolicyConfig,
    points: np.ndarray,
    hyper: KernelHyper,
    seeds: Sequence[float],
    observe: Observer,
    rng: np.random.Generator,
    *,
    change_times: Sequence[int] = (),
    seed_oracle: SeedOracle | None = None,
    true_value: Callable[[float], float] | None = None,
) -> Policy:
    """Build a policy, observe its seeds once each and fit the initial GP.

    ``true_value`` (noiseless f at t=0) enables the seed safety check.
    """
    try:
        cls = POLICY_CLASSES[policy_id]
    except KeyError:
        raise ValueError(f"unknown policy {policy_id!r}; expected one of {POLICY_IDS}") from None
    if cls in (GenieCPSS, GenieSS) and seed_oracle is None:
        raise ValueError(f"{policy_id} needs a seed oracle")
    if true_value is not None:
        for x in seeds:
            if true_value(x) < cfg.h:
                raise UnsafeSeed(f"seed {x} has value {true_value(x)} below h={cfg.h}")
    return cls(
        cfg, points, hyper, seeds, observe, rng,
        change_times=change_times, seed_oracle=seed_oracle,
    )
