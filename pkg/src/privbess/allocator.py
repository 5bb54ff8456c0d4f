"""Per-unit power commands from local state and local estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AllocationInputs:
    """Inputs of the allocation law. Fields may be scalars or equal-length arrays.

    ``eta`` and ``sigma`` descale the privacy estimators; both are 1 for the
    plain scheme.
    """

    unit_state: np.ndarray | float
    avg_state_estimate: np.ndarray | float
    avg_power_estimate: np.ndarray | float
    floor: float
    eta: float = 1.0
    sigma: float = 1.0
    mode: object = None


def allocate(inputs: AllocationInputs):
    """``x_i / max(floor, xhat_i / eta) * phat_i / sigma``."""
    if not inputs.floor > 0:
        raise ValueError(f"allocation floor must be positive, got {inputs.floor}")
    if not (inputs.eta > 0 and inputs.sigma > 0):
        raise ValueError("eta and sigma must be positive")
    denom = np.maximum(inputs.floor, np.divide(inputs.avg_state_estimate, inputs.eta))
    return inputs.unit_state / denom * (inputs.avg_power_estimate / inputs.sigma)


def ideal_allocate(states, p_star) -> np.ndarray:
    """Centralised proportional sharing ``x_i / sum(x) * p_star``."""
    states = np.asarray(states, dtype=float)
    total = states.sum()
    if total == 0:
        raise ZeroDivisionError("sum of unit states is zero")
    return states / total * p_star


def floor_active(avg_state_estimate, eta: float, floor: float):
    return np.divide(avg_state_estimate, eta) <= floor
