"""Closed-loop integration and trace assembly."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..adversary import AdversaryObserverState, ObservableBundle, infer_power
from ..allocator import AllocationInputs, allocate
from ..errors import IntegrationError, SocBoundViolation
from ..estimators import decomp_init
from ..plant import OperatingMode
from . import backend
from .scenario import Scenario

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Layout:
    n: int
    scheme: str
    adversary: bool

    @property
    def est(self) -> slice:
        return slice(self.n, 2 * self.n if self.scheme == "baseline" else 5 * self.n)

    @property
    def off_p(self) -> int:
        return 2 * self.n if self.scheme == "baseline" else 5 * self.n

    @property
    def off_a(self) -> int:
        return self.off_p + self.n

    @property
    def size(self) -> int:
        return self.off_a + (4 * self.n if self.adversary else 0)

    def block(self, k: int, base: int = 0) -> slice:
        return slice(base + k * self.n, base + (k + 1) * self.n)

    @property
    def transmitted(self) -> slice:
        return self.block(1) if self.scheme == "baseline" else self.block(3)


def layout(scenario: Scenario) -> Layout:
    return Layout(scenario.n, scenario.scheme, scenario.adversary.enabled)


def initial_state(scenario: Scenario) -> np.ndarray:
    lay = layout(scenario)
    n = scenario.n
    soc0 = np.asarray(scenario.initial_soc, dtype=float)
    cv = scenario.energy_scales
    x0 = cv * soc0 if scenario.mode is OperatingMode.DISCHARGING else cv * (1.0 - soc0)
    y = np.zeros(lay.size)
    y[:n] = soc0
    if scenario.scheme == "baseline":
        y[lay.block(1)] = x0
    else:
        d = decomp_init(x0, scenario.eta, scenario.splitter)
        y[lay.block(1)], y[lay.block(2)], y[lay.block(3)], y[lay.block(4)] = (
            d.true_alpha, d.true_beta, d.est_alpha, d.est_beta)
    if lay.adversary:
        obs = AdversaryObserverState.initial(y[lay.transmitted], scenario.adversary.gains)
        for k, arr in enumerate((obs.v, obs.xi, obs.phi_prime, obs.z)):
            y[lay.block(k, lay.off_a)] = arr
    return y


def _kernel_args(scenario: Scenario):
    topo = scenario.topology
    kind, par, tab_t, tab_v = scenario.profile.encode()
    sp = scenario.splitter
    g = scenario.adversary.gains
    lo, hi = scenario.soc_limits
    return dict(
        n=scenario.n,
        scheme=0 if scenario.scheme == "baseline" else 1,
        adv_on=bool(scenario.adversary.enabled),
        adj=topo.adjacency.astype(float),
        leader=topo.leader.astype(float),
        cv=scenario.energy_scales,
        msign=scenario.mode.sign,
        beta=float(scenario.beta),
        kappa=float(scenario.kappa),
        eta=float(scenario.scale_eta),
        sigma=float(scenario.scale_sigma),
        floor=float(scenario.floor),
        sp_amp=float(sp.amplitude),
        sp_omega=np.asarray(sp.omega, dtype=float),
        sp_theta=np.asarray(sp.theta, dtype=float),
        kind=kind, par=par, tab_t=tab_t, tab_v=tab_v,
        gains=np.array([g.k1, g.k2, g.k3, g.k4], dtype=float),
        soc_lo=lo, soc_hi=hi,
    )


def _integrate(scenario, y0, t0, h, n_steps, sample_every, backend_name):
    fn = backend.integrator(backend_name)
    n_samples = n_steps // sample_every + 1
    out_t = np.zeros(n_samples)
    out_y = np.zeros((n_samples, y0.size))
    status, ns, resid, last_t = fn(np.ascontiguousarray(y0, dtype=float), float(t0), float(h), int(n_steps),
                                   int(sample_every), out_t=out_t, out_y=out_y, **_kernel_args(scenario))
    return int(status), out_t[:ns], out_y[:ns], float(resid), float(last_t)


def step(scenario: Scenario, full_state, t: float, h: float, backend_name: str | None = None) -> np.ndarray:
    """One RK4 step of the full closed-loop state."""
    if not h > 0:
        raise ValueError("step size must be positive")
    y = np.asarray(full_state, dtype=float)
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite state", last_valid_t=t)
    status, _, ys, _, last_t = _integrate(scenario, y, t, h, 1, 1, backend_name)
    if status == 2:
        raise IntegrationError("non-finite state after step", last_valid_t=last_t)
    if status == 1:
        raise SocBoundViolation("SoC left its admissible range", last_valid_t=last_t)
    return ys[-1]


@dataclass
class Trace:
    scenario: Scenario
    t: np.ndarray
    states: np.ndarray
    split_residual: float = 0.0
    status: str = "ok"
    backend: str = "numba"
    wall_time: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def layout(self) -> Layout:
        return layout(self.scenario)

    def _block(self, k, base=0):
        return self.states[:, self.layout.block(k, base)]

    @property
    def soc(self):
        return self.states[:, :self.scenario.n]

    @property
    def x(self):
        cv = self.scenario.energy_scales
        return cv * self.soc if self.scenario.mode is OperatingMode.DISCHARGING else cv * (1.0 - self.soc)

    @property
    def x_avg(self):
        return self.x.mean(axis=1)

    @property
    def xhat(self):
        """Baseline estimates, or the shared alpha estimates under privacy."""
        return self.states[:, self.layout.transmitted]

    @property
    def true_alpha(self):
        return self._block(1)

    @property
    def true_beta(self):
        return self._block(2)

    @property
    def est_alpha(self):
        return self._block(3)

    @property
    def est_beta(self):
        return self._block(4)

    @property
    def phat(self):
        return self.states[:, self.layout.off_p:self.layout.off_p + self.scenario.n]

    @property
    def p_star(self):
        return self.scenario.profile(self.t)

    @property
    def p(self):
        if "p" not in self._cache:
            sc = self.scenario
            self._cache["p"] = allocate(AllocationInputs(self.x, self.xhat, self.phat, sc.floor,
                                                         sc.scale_eta, sc.scale_sigma))
        return self._cache["p"]

    @property
    def p_sigma(self):
        return self.p.sum(axis=1)

    def observer(self) -> AdversaryObserverState:
        base = self.layout.off_a
        return AdversaryObserverState(self._block(0, base), self._block(1, base), self._block(2, base),
                                      self._block(3, base), self.scenario.adversary.gains)

    def bundle(self) -> ObservableBundle:
        sc = self.scenario
        return ObservableBundle(self.xhat, self.phat, sc.topology.adjacency, sc.beta, sc.kappa)

    @property
    def p_inferred(self):
        if not self.scenario.adversary.enabled:
            raise ValueError("adversary disabled in this scenario")
        if "p_inf" not in self._cache:
            guess = self.scenario.adversary.floor_guess or self.scenario.floor
            self._cache["p_inf"] = infer_power(self.observer(), self.bundle(), guess)
        return self._cache["p_inf"]

    def columns(self) -> list[tuple[str, np.ndarray]]:
        n = self.scenario.n
        cols = [("t", self.t[:, None])]

        def add(prefix, arr):
            cols.append(([f"{prefix}_{i + 1}" for i in range(n)], arr))

        add("S", self.soc)
        add("x", self.x)
        if self.scenario.scheme == "baseline":
            add("xhat", self.xhat)
        else:
            add("x_alpha", self.true_alpha)
            add("x_beta", self.true_beta)
            add("xhat_alpha", self.est_alpha)
            add("xhat_beta", self.est_beta)
        add("phat", self.phat)
        add("p", self.p)
        cols.append(("p_sigma", self.p_sigma[:, None]))
        cols.append(("p_star", self.p_star[:, None]))
        if self.scenario.adversary.enabled:
            obs = self.observer()
            add("adv_v", obs.v)
            add("adv_xi", obs.xi)
            add("adv_phi_prime", obs.phi_prime)
            add("adv_z", obs.z)
            add("adv_p", self.p_inferred)
        return cols

    def header(self) -> list[str]:
        names = []
        for name, _ in self.columns():
            names.extend([name] if isinstance(name, str) else name)
        return names

    def table(self) -> np.ndarray:
        return np.hstack([arr for _, arr in self.columns()])

    def to_csv(self, path) -> None:
        data = self.table()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for row in data:
                w.writerow([repr(float(v)) for v in row])


def run(scenario: Scenario, backend_name: str | None = None, validate: bool = True) -> Trace:
    """Integrate a scenario over its horizon.

    Raises ``SocBoundViolation`` / ``IntegrationError`` with the partial trace
    attached when the run cannot complete.
    """
    if validate:
        scenario.validate()
    name = backend.resolve(backend_name)
    y0 = initial_state(scenario)
    tic = time.perf_counter()
    status, ts, ys, resid, last_t = _integrate(scenario, y0, 0.0, scenario.step, scenario.n_steps,
                                               scenario.sample_every, name)
    wall = time.perf_counter() - tic
    trace = Trace(scenario, ts, ys, split_residual=resid, backend=name, wall_time=wall,
                  status={0: "ok", 1: "soc_bound", 2: "nonfinite"}[status])
    log.debug("run %s: %d samples in %.3fs (%s)", scenario.name, ts.size, wall, name)
    if status == 1:
        raise SocBoundViolation("SoC left [soc_floor, soc_ceiling]", last_valid_t=last_t, trace=trace)
    if status == 2:
        raise IntegrationError("state became non-finite", last_valid_t=last_t, trace=trace)
    return trace
