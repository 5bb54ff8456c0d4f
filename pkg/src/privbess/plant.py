"""Battery unit model: Coulomb-counting SoC with constant terminal voltage.

Two time-unit policies are supported. ``"compressed"`` uses the printed
ampere-hour figure directly as the charge capacity per engine time unit, so
SoC moves on the seconds scale of the replication scenarios. ``"si"``
converts to ampere-seconds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

TIME_UNITS = {"compressed": 1.0, "si": 3600.0}


class OperatingMode(enum.Enum):
    DISCHARGING = "discharging"
    CHARGING = "charging"

    @property
    def sign(self) -> float:
        """+1 when the unit state is C*V*S, -1 when it is C*V*(1 - S)."""
        return 1.0 if self is OperatingMode.DISCHARGING else -1.0


@dataclass(frozen=True)
class BatteryParams:
    capacity_ah: float
    voltage_v: float
    soc_floor: float = 0.02
    soc_ceiling: float = 0.98

    def __post_init__(self):
        if not self.capacity_ah > 0:
            raise ValueError(f"capacity must be positive, got {self.capacity_ah}")
        if not self.voltage_v > 0:
            raise ValueError(f"voltage must be positive, got {self.voltage_v}")
        if not 0.0 <= self.soc_floor < self.soc_ceiling <= 1.0:
            raise ValueError(f"need 0 <= soc_floor < soc_ceiling <= 1, got {self.soc_floor}, {self.soc_ceiling}")

    def effective_capacity(self, time_unit: str = "compressed") -> float:
        return self.capacity_ah * TIME_UNITS[time_unit]

    def energy_scale(self, time_unit: str = "compressed") -> float:
        """C_eff * V, the unit state of a full (discharging) battery."""
        return self.effective_capacity(time_unit) * self.voltage_v


def _mode(mode) -> OperatingMode:
    return mode if isinstance(mode, OperatingMode) else OperatingMode(mode)


def unit_state(params: BatteryParams, soc, mode, time_unit: str = "compressed"):
    """Deliverable (discharging) or absorbable (charging) energy of one unit."""
    cv = params.energy_scale(time_unit)
    if _mode(mode) is OperatingMode.DISCHARGING:
        return cv * soc
    return cv * (1.0 - soc)


def soc_rate(params: BatteryParams, power, time_unit: str = "compressed"):
    return -power / params.energy_scale(time_unit)


def unit_state_rate(mode, power):
    return -power if _mode(mode) is OperatingMode.DISCHARGING else power


def output_current(power, voltage):
    if np.any(np.asarray(voltage) <= 0):
        raise ValueError("voltage must be positive")
    return power / voltage


def state_bounds(units, mode, time_unit: str = "compressed") -> tuple[float, float]:
    """Energy bounds (a1, a2) with a1 <= x_i(t) <= a2 for runs that respect the SoC limits.

    a1 is the smallest residual energy a unit may hold at the bound it is
    approaching; a2 is the largest full-scale energy.
    """
    mode = _mode(mode)
    scales = np.array([u.energy_scale(time_unit) for u in units])
    if mode is OperatingMode.DISCHARGING:
        margins = np.array([u.soc_floor for u in units])
    else:
        margins = np.array([1.0 - u.soc_ceiling for u in units])
    return float(np.min(scales * margins)), float(np.max(scales))
