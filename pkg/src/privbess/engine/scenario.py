"""Scenario description and validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from ..adversary import AttackGains
from ..errors import ConfigError
from ..estimators import SplitGenerator
from ..plant import TIME_UNITS, BatteryParams, OperatingMode, state_bounds
from ..topology import Topology, decomposed_laplacian, jacobi_eigh, validate_connected

SCHEMES = ("baseline", "privacy")
# Classical RK4 is stable on the negative real axis for h * rate < 2.785.
RK4_REAL_STABILITY = 2.785
STABILITY_MARGIN = 2.5
PROFILE_KINDS = ("constant", "sinusoid", "table")


@dataclass(frozen=True)
class PowerProfile:
    """Desired total power p*(t) in watts."""

    kind: str = "sinusoid"
    value_w: float = 0.0
    amplitude_w: float = 0.0
    offset_w: float = 0.0
    omega_rad_per_s: float = 1.0
    phase_rad: float = 0.0
    times_s: tuple = ()
    values_w: tuple = ()

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ConfigError(f"unknown profile kind {self.kind!r}; expected one of {PROFILE_KINDS}", key="power.profile")
        if self.kind == "table":
            if len(self.times_s) == 0 or len(self.times_s) != len(self.values_w):
                raise ConfigError("table profile needs equal-length, non-empty times_s and values_w", key="power")
            if any(b <= a for a, b in zip(self.times_s, self.times_s[1:])):
                raise ConfigError("table times_s must be strictly increasing", key="power.times_s")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.value_w)
        if self.kind == "sinusoid":
            return self.amplitude_w * np.sin(self.omega_rad_per_s * t + self.phase_rad) + self.offset_w
        times = np.asarray(self.times_s, dtype=float)
        idx = np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 1)
        return np.asarray(self.values_w, dtype=float)[idx]

    def encode(self):
        """(kind code, parameter vector, table times, table values) for the kernels."""
        code = PROFILE_KINDS.index(self.kind)
        if self.kind == "constant":
            par = [self.value_w, 0.0, 0.0, 0.0]
        else:
            par = [self.amplitude_w, self.offset_w, self.omega_rad_per_s, self.phase_rad]
        tt = np.asarray(self.times_s if self.kind == "table" else (0.0,), dtype=float)
        tv = np.asarray(self.values_w if self.kind == "table" else (0.0,), dtype=float)
        return code, np.asarray(par, dtype=float), tt, tv


@dataclass(frozen=True)
class PowerLimits:
    """Bounds that realise the bounded-demand assumption: lo <= |p*| <= hi, |dp*/dt| <= rate."""

    lo_w: float = 0.0
    hi_w: float = math.inf
    rate_w_per_s: float = math.inf


@dataclass(frozen=True)
class SplitConfig:
    amplitude: float = 0.3
    omega_min: float = 0.5
    omega_max: float = 2.0
    initial_split_max: float = 0.5


@dataclass(frozen=True)
class AdversaryConfig:
    enabled: bool = False
    gains: AttackGains = field(default_factory=AttackGains)
    floor_guess: float | None = None


@dataclass(frozen=True)
class Thresholds:
    soc_spread: float = 0.02
    power_rel: float = 0.02


@dataclass(frozen=True, eq=False)
class Scenario:
    topology: Topology
    units: tuple
    initial_soc: tuple
    profile: PowerProfile
    mode: OperatingMode = OperatingMode.DISCHARGING
    name: str = "scenario"
    scheme: str = "privacy"
    beta: float = 300.0
    kappa: float = 210.0
    eta: float = 3.0
    sigma: float = 4.0
    split: SplitConfig = field(default_factory=SplitConfig)
    seed: int = 1
    time_unit: str = "compressed"
    horizon: float = 9.0
    step: float = 1e-3
    sample_every: int = 10
    settle_fraction: float = 0.4
    limits: PowerLimits = field(default_factory=PowerLimits)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)

    def replace(self, **changes) -> "Scenario":
        return replace(self, **changes)

    @property
    def n(self) -> int:
        return self.topology.n

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))

    @property
    def energy_scales(self) -> np.ndarray:
        return np.array([u.energy_scale(self.time_unit) for u in self.units])

    @property
    def bounds(self) -> tuple[float, float]:
        return state_bounds(self.units, self.mode, self.time_unit)

    @property
    def floor(self) -> float:
        """Allocation denominator floor a1 / 2."""
        return 0.5 * self.bounds[0]

    @property
    def soc_limits(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([u.soc_floor for u in self.units]), np.array([u.soc_ceiling for u in self.units]))

    @cached_property
    def splitter(self) -> SplitGenerator:
        if self.scheme == "baseline":
            return SplitGenerator.symmetric(self.n)
        return SplitGenerator.from_seed(
            self.n, self.seed, amplitude=self.split.amplitude,
            omega_range=(self.split.omega_min, self.split.omega_max), u_max=self.split.initial_split_max,
        )

    @property
    def scale_eta(self) -> float:
        return self.eta if self.scheme == "privacy" else 1.0

    @property
    def scale_sigma(self) -> float:
        return self.sigma if self.scheme == "privacy" else 1.0

    def stiffness_rate(self) -> float:
        """Fastest decay rate of the linear estimator/observer dynamics."""
        L = self.topology.laplacian
        consensus = L if self.scheme == "baseline" else decomposed_laplacian(L)
        rates = [
            self.beta * jacobi_eigh(consensus)[0][-1],
            self.kappa * jacobi_eigh(L + np.diag(self.topology.leader.astype(float)))[0][-1],
        ]
        if self.adversary.enabled:
            g = self.adversary.gains
            rates.append(max(g.k1, g.k2, g.k3, g.k4) * 2.0)
        return float(max(rates))

    def stable_refinement(self) -> int:
        """Smallest integer k such that step / k keeps RK4 inside the stability margin."""
        return max(1, int(np.ceil(self.step * self.stiffness_rate() / STABILITY_MARGIN)))

    def validate(self) -> None:
        """Raise ConfigError on the first violated precondition of a run."""
        n = self.n
        if len(self.units) != n or len(self.initial_soc) != n:
            raise ConfigError(f"expected {n} units and initial SoCs, got {len(self.units)} and {len(self.initial_soc)}",
                              key="units")
        if not validate_connected(self.topology):
            raise ConfigError("communication graph must be undirected and connected (Assumption 1)", key="topology")
        if not self.topology.has_leader:
            raise ConfigError("desired power must be known by at least one battery unit (Assumption 3)",
                              key="topology.leaders")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}", key="scheme")
        if self.time_unit not in TIME_UNITS:
            raise ConfigError(f"time_unit must be one of {tuple(TIME_UNITS)}", key="time_unit")
        for name, key in (("beta", "gains.beta"), ("kappa", "gains.kappa"), ("eta", "privacy.eta"),
                          ("sigma", "privacy.sigma"), ("step", "step_s"), ("horizon", "horizon_s")):
            if not getattr(self, name) > 0:
                raise ConfigError("must be positive", key=key)
        if self.sample_every < 1:
            raise ConfigError("must be >= 1", key="sample_every")
        if not 0.0 < self.settle_fraction <= 1.0:
            raise ConfigError("must lie in (0, 1]", key="settle_fraction")
        if abs(self.n_steps * self.step - self.horizon) > 1e-9 * self.horizon:
            raise ConfigError("horizon must be an integer multiple of step", key="horizon_s")
        if not 0.0 <= self.split.amplitude <= 0.4:
            raise ConfigError("split amplitude must lie in [0, 0.4]", key="privacy.split_amplitude")
        if not 0.0 <= self.split.initial_split_max < 1.0:
            raise ConfigError("initial split bound must lie in [0, 1)", key="privacy.initial_split_max")
        if self.step * self.stiffness_rate() >= STABILITY_MARGIN:
            raise ConfigError(f"step {self.step:g} too large for RK4 stability: step * fastest rate = "
                              f"{self.step * self.stiffness_rate():.3g} >= {STABILITY_MARGIN}", key="step_s")
        lo, hi = self.soc_limits
        soc0 = np.asarray(self.initial_soc, dtype=float)
        bad = np.flatnonzero((soc0 < lo) | (soc0 > hi))
        if bad.size:
            raise ConfigError(f"initial SoC of unit {bad[0] + 1} outside [soc_floor, soc_ceiling]", key="units")
        if not self.bounds[0] > 0:
            raise ConfigError("state lower bound a1 must be positive; raise soc_floor / lower soc_ceiling",
                              key="units")
        self._check_profile()

    def _check_profile(self) -> None:
        # Sample points of the run grid plus the midpoints, where the demand is evaluated.
        t = np.linspace(0.0, self.horizon, 2 * self.n_steps + 1)
        p = self.profile(t)
        mag = np.abs(p)
        lim = self.limits
        if mag.min() < lim.lo_w - 1e-9 or mag.max() > lim.hi_w + 1e-9:
            raise ConfigError(f"|p*| spans [{mag.min():.6g}, {mag.max():.6g}] W, outside configured "
                              f"[{lim.lo_w}, {lim.hi_w}] (Assumption 2)", key="power")
        if self.profile.kind != "table" and t.size > 1:
            rate = np.max(np.abs(np.diff(p) / np.diff(t)))
            if rate > lim.rate_w_per_s * (1 + 1e-6):
                raise ConfigError(f"|dp*/dt| reaches {rate:.6g} W/s above configured {lim.rate_w_per_s} "
                                  f"(Assumption 2)", key="power.rate_bound_w_per_s")
        if self.mode is OperatingMode.DISCHARGING and p.min() < 0:
            raise ConfigError("discharging scenario with negative desired power", key="power")
        if self.mode is OperatingMode.CHARGING and p.max() > 0:
            raise ConfigError("charging scenario with positive desired power", key="power")
