"""One-parameter sweeps over a base scenario with matched seeds."""

from __future__ import annotations

import logging

from ..errors import PrivBessError
from .metrics import metrics
from .scenario import Scenario
from .simulate import run

log = logging.getLogger(__name__)

SWEEP_PARAMETERS = {"beta": "beta", "kappa": "kappa", "eta": "eta", "sigma": "sigma", "h": "step"}


def sweep(base: Scenario, parameter: str, values, backend_name=None) -> list[dict]:
    """Run ``base`` once per value; a failing run becomes a row with ``error`` set."""
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"cannot sweep {parameter!r}; choose from {sorted(SWEEP_PARAMETERS)}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    field = SWEEP_PARAMETERS[parameter]
    rows = []
    for value in values:
        changes = {field: float(value)}
        if field == "step":
            # keep the sample times fixed in absolute time
            ratio = base.step / float(value)
            changes["sample_every"] = max(1, int(round(base.sample_every * ratio)))
        sc = base.replace(**changes)
        if field != "step":
            k = sc.stable_refinement()
            if k > 1:
                # refine by an integer factor so the sample grid is unchanged
                log.info("sweep %s=%s: step refined by %d for RK4 stability", parameter, value, k)
                sc = sc.replace(step=sc.step / k, sample_every=sc.sample_every * k)
        row = {"parameter": parameter, "value": float(value)}
        try:
            row.update(metrics(run(sc, backend_name)))
            row["error"] = ""
        except (PrivBessError, ValueError) as exc:
            log.warning("sweep %s=%s failed: %s", parameter, value, exc)
            row["error"] = str(exc)
        rows.append(row)
    return rows
