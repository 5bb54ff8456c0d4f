from .metrics import metrics
from .scenario import AdversaryConfig, PowerLimits, PowerProfile, Scenario, SplitConfig, Thresholds
from .simulate import Trace, initial_state, run, step
from .sweep import SWEEP_PARAMETERS, sweep

__all__ = [
    "AdversaryConfig", "PowerLimits", "PowerProfile", "Scenario", "SplitConfig", "Thresholds",
    "Trace", "initial_state", "run", "step", "metrics", "sweep", "SWEEP_PARAMETERS",
]
