"""Continuous-time distributed estimators.

* ``dac_rhs``: dynamic average consensus on the unit states.
* ``decomp_rhs``: the same estimator after splitting every unit into a shared
  alpha sub-state and a hidden beta twin whose sum is ``2 * eta * x_i``.
* ``power_est_rhs``: leader-follower tracking of ``sigma * p_star / n``.

All right-hand sides are pure functions returning fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .topology import Topology


def _check_len(name, arr, n):
    if arr.shape != (n,):
        raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")


@dataclass
class DacState:
    estimates: np.ndarray

    @classmethod
    def initial(cls, x0) -> "DacState":
        return cls(np.array(x0, dtype=float))


def dac_rhs(state: DacState, x_rate, topology: Topology, beta: float) -> np.ndarray:
    xhat = np.asarray(state.estimates, dtype=float)
    x_rate = np.asarray(x_rate, dtype=float)
    _check_len("estimates", xhat, topology.n)
    _check_len("x_rate", x_rate, topology.n)
    return x_rate - beta * (topology.laplacian @ xhat)


@dataclass(frozen=True)
class SplitGenerator:
    """Seeded generator of the alpha/beta split.

    ``ratio(t)`` is the share of ``2 * eta * xdot`` routed to the alpha
    sub-state; ``u`` sets the initial split ``(1 + u, 1 - u) * eta * x0``.
    """

    theta: np.ndarray
    omega: np.ndarray
    amplitude: float
    u: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 0.4:
            raise ValueError(f"split amplitude must lie in [0, 0.4], got {self.amplitude}")

    @classmethod
    def from_seed(cls, n: int, seed, amplitude: float = 0.3, omega_range=(0.5, 2.0), u_max: float = 0.5):
        # Independent child streams so changing one draw never shifts another.
        ss = np.random.SeedSequence(seed)
        s_theta, s_omega, s_u = (np.random.default_rng(s) for s in ss.spawn(3))
        theta = s_theta.uniform(0.0, 2.0 * np.pi, n)
        omega = s_omega.uniform(omega_range[0], omega_range[1], n)
        u = s_u.uniform(-u_max, u_max, n)
        return cls(theta=theta, omega=omega, amplitude=float(amplitude), u=u)

    @classmethod
    def symmetric(cls, n: int) -> "SplitGenerator":
        z = np.zeros(n)
        return cls(theta=z, omega=np.ones(n), amplitude=0.0, u=z.copy())

    def ratio(self, t: float) -> np.ndarray:
        return 0.5 + self.amplitude * np.sin(self.omega * t + self.theta)


def split_rates(total_rate, ratio):
    """Split ``total_rate`` into (alpha, beta) parts whose float sum is exactly ``total_rate``.

    The larger share is formed by multiplication and the smaller by
    subtraction; the subtraction is then exact (Sterbenz), so the sum
    reproduces ``total_rate`` bit for bit.
    """
    total_rate = np.asarray(total_rate, dtype=float)
    ratio = np.asarray(ratio, dtype=float)
    big_alpha = ratio >= 0.5
    alpha = np.where(big_alpha, total_rate * ratio, 0.0)
    beta = np.where(big_alpha, 0.0, total_rate * (1.0 - ratio))
    alpha = np.where(big_alpha, alpha, total_rate - beta)
    beta = np.where(big_alpha, total_rate - alpha, beta)
    return alpha, beta


@dataclass
class DecomposedState:
    true_alpha: np.ndarray
    true_beta: np.ndarray
    est_alpha: np.ndarray
    est_beta: np.ndarray
    eta: float
    split: SplitGenerator

    def mean_estimate(self) -> float:
        """Average over all 2n estimator sub-states; tracks ``eta * x_a``."""
        return float((np.sum(self.est_alpha) + np.sum(self.est_beta)) / (2 * self.est_alpha.size))


def decomp_init(x0, eta: float, split: SplitGenerator) -> DecomposedState:
    if not eta > 0:
        raise ValueError("eta must be positive")
    x0 = np.asarray(x0, dtype=float)
    alpha = eta * x0 * (1.0 + split.u)
    beta = 2.0 * eta * x0 - alpha
    return DecomposedState(alpha, beta, alpha.copy(), beta.copy(), float(eta), split)


def decomp_rhs(state: DecomposedState, x_rate, t: float, topology: Topology, beta: float):
    """Rates ``(d true_alpha, d true_beta, d est_alpha, d est_beta)``.

    Only ``est_alpha`` couples across edges; ``est_beta`` talks to its own
    alpha twin alone.
    """
    n = topology.n
    x_rate = np.asarray(x_rate, dtype=float)
    _check_len("x_rate", x_rate, n)
    _check_len("est_alpha", state.est_alpha, n)
    da, db = split_rates(2.0 * state.eta * x_rate, state.split.ratio(t))
    gap = state.est_alpha - state.est_beta
    dea = da - beta * (topology.laplacian @ state.est_alpha) - beta * gap
    deb = db + beta * gap
    return da, db, dea, deb


@dataclass
class PowerEstState:
    estimates: np.ndarray
    sigma: float = 1.0
    kappa: float = 1.0

    @classmethod
    def initial(cls, n: int, sigma: float = 1.0, kappa: float = 1.0) -> "PowerEstState":
        return cls(np.zeros(n), float(sigma), float(kappa))


def average_desired_power(p_star, n: int):
    return p_star / n


def power_est_rhs(state: PowerEstState, p_star: float, topology: Topology, n: int | None = None) -> np.ndarray:
    """Leader-follower consensus on ``sigma * p_star / n``.

    With ``sigma == 1`` this is the plain (non-private) estimator.
    """
    if not topology.has_leader:
        raise ConfigError("no unit has access to the desired power (leader set is empty)")
    n = topology.n if n is None else n
    phat = np.asarray(state.estimates, dtype=float)
    _check_len("estimates", phat, topology.n)
    target = state.sigma * average_desired_power(p_star, n)
    return -state.kappa * (topology.laplacian @ phat + topology.leader * (phat - target))


def measure_tracking_error(times, estimates, reference, settle_fraction: float = 0.4) -> float:
    """Sup over the settled window of ``max_i |estimate_i(t) - reference(t)|``.

    ``estimates`` is (T, n); ``reference`` is (T,) or broadcastable to it.
    The window is the trailing ``settle_fraction`` of the time span.
    """
    times = np.asarray(times, dtype=float)
    mask = settle_mask(times, settle_fraction)
    est = np.asarray(estimates, dtype=float)[mask]
    ref = np.asarray(reference, dtype=float)
    ref = ref[mask] if ref.ndim >= 1 and ref.shape[0] == times.shape[0] else ref
    if est.ndim == 2 and np.ndim(ref) == 1:
        ref = ref[:, None]
    return float(np.max(np.abs(est - ref)))


def settle_mask(times, settle_fraction: float) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.size == 0 or not 0.0 < settle_fraction <= 1.0:
        raise ValueError("settle window is empty")
    t0 = times[-1] - settle_fraction * (times[-1] - times[0])
    mask = times >= t0 - 1e-12 * max(1.0, abs(times[-1]))
    if not mask.any():
        raise ValueError("settle window is empty")
    return mask
