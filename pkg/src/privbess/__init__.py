"""Privacy-preserving distributed SoC balancing for networked battery storage."""

from . import adversary, allocator, estimators, plant, topology
from .engine import Scenario, Trace, metrics, run, sweep

__version__ = "0.1.0"

__all__ = ["adversary", "allocator", "estimators", "plant", "topology", "Scenario", "Trace", "metrics", "run",
           "sweep"]
