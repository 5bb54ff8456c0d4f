"""External eavesdropper: an observer fed only by intercepted transmissions.

The observer reconstructs the transmitted estimate (``v``), the private unit
state (``xi``) and its derivative (``phi``) from what goes over the wire,
then plugs its reconstructions into the plain allocation law to guess each
unit's power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocator import AllocationInputs, allocate


@dataclass(frozen=True, slots=True)
class ObservableBundle:
    """Everything the eavesdropper sees at one instant.

    The field set is closed: hidden sub-states, scaling constants and raw unit
    states have no slot here, so they cannot reach the observer.
    """

    transmitted_estimates: np.ndarray
    power_estimates: np.ndarray
    adjacency: np.ndarray
    beta: float
    kappa: float

    def __post_init__(self):
        n = np.shape(self.adjacency)[0]
        if np.shape(self.transmitted_estimates)[-1] != n or np.shape(self.power_estimates)[-1] != n:
            raise ValueError("bundle signals do not match the adjacency size")


@dataclass(frozen=True)
class AttackGains:
    k1: float = 50.0
    k2: float = 50.0
    k3: float = 50.0
    k4: float = 50.0

    def __post_init__(self):
        if min(self.k1, self.k2, self.k3, self.k4) <= 0:
            raise ValueError("observer gains must be positive")


@dataclass
class AdversaryObserverState:
    v: np.ndarray
    xi: np.ndarray
    phi_prime: np.ndarray
    z: np.ndarray
    gains: AttackGains

    @classmethod
    def initial(cls, first_transmission, gains: AttackGains | None = None) -> "AdversaryObserverState":
        """Observer start: ``v`` copies the first transmission, ``phi`` and ``z`` start at 0, ``xi`` blind at 0."""
        gains = gains or AttackGains()
        tr = np.array(first_transmission, dtype=float)
        n = tr.size
        return cls(v=tr.copy(), xi=np.zeros(n), phi_prime=-gains.k3 * tr, z=np.zeros(n), gains=gains)

    def phi(self, bundle: ObservableBundle) -> np.ndarray:
        return self.gains.k3 * bundle.transmitted_estimates + self.phi_prime


def consensus_term(transmitted, adjacency, beta) -> np.ndarray:
    """``beta * sum_j a_ij (s_i - s_j)`` computed from intercepted values only."""
    adj = np.asarray(adjacency, dtype=float)
    s = np.asarray(transmitted, dtype=float)
    return beta * (adj.sum(axis=1) * s - adj @ s)


def observer_rhs(state: AdversaryObserverState, bundle: ObservableBundle):
    """Rates ``(dv, dxi, dphi_prime, dz)``."""
    n = bundle.adjacency.shape[0]
    if state.v.shape != (n,):
        raise ValueError("observer state does not match bundle size")
    g = state.gains
    s = bundle.transmitted_estimates
    cons = consensus_term(s, bundle.adjacency, bundle.beta)
    phi = g.k3 * s + state.phi_prime
    innov = s - state.v
    dv = phi - cons + g.k1 * innov
    dxi = g.k2 * (s - state.z - state.xi) + phi
    dphi_prime = -g.k3 * (phi - cons) + g.k4 * innov
    dz = -cons
    return dv, dxi, dphi_prime, dz


def infer_power(state: AdversaryObserverState, bundle: ObservableBundle, floor_guess: float):
    """Attacker's power guess via the plain allocation law, with no descaling."""
    return allocate(AllocationInputs(
        unit_state=state.xi,
        avg_state_estimate=state.v,
        avg_power_estimate=bundle.power_estimates,
        floor=floor_guess,
    ))


@dataclass(frozen=True)
class LeakageMetrics:
    state_rmse: np.ndarray
    power_rmse: np.ndarray
    relative_sup_error: np.ndarray

    def summary(self) -> dict:
        return {
            "state_rmse_max": float(np.max(self.state_rmse)),
            "power_rmse_max": float(np.max(self.power_rmse)),
            "relative_sup_error_max": float(np.max(self.relative_sup_error)),
            "relative_sup_error_min": float(np.min(self.relative_sup_error)),
        }


def leakage_metrics(true_states, inferred_states, true_power, inferred_power, window=None) -> LeakageMetrics:
    """Windowed reconstruction errors per unit.

    Arrays are (T, n). ``relative_sup_error`` is the sup of the power error
    over the window divided by the sup of the true power magnitude.
    """
    arrays = [np.asarray(a, dtype=float) for a in (true_states, inferred_states, true_power, inferred_power)]
    if window is not None:
        arrays = [a[window] for a in arrays]
    xs, xi, ps, pi = arrays
    if xs.shape[0] == 0:
        raise ValueError("leakage window is empty")
    if not (xs.shape == xi.shape == ps.shape == pi.shape):
        raise ValueError("signals are not aligned")
    state_rmse = np.sqrt(np.mean((xi - xs) ** 2, axis=0))
    power_rmse = np.sqrt(np.mean((pi - ps) ** 2, axis=0))
    scale = np.max(np.abs(ps), axis=0)
    err = np.max(np.abs(pi - ps), axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(scale > 0, err / np.where(scale > 0, scale, 1.0), np.where(err > 0, np.inf, 0.0))
    return LeakageMetrics(state_rmse, power_rmse, rel)
