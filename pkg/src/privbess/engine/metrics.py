"""Scenario-level metrics over the settled window."""

from __future__ import annotations

import numpy as np

from ..adversary import leakage_metrics
from ..allocator import floor_active
from ..estimators import settle_mask
from ..topology import decomposed_laplacian, spectral_summary
from .simulate import Trace


def soc_spread(trace: Trace) -> np.ndarray:
    return trace.soc.max(axis=1) - trace.soc.min(axis=1)


def power_tracking_rel_error(trace: Trace, mask=None) -> np.ndarray:
    err = np.abs(trace.p_sigma - trace.p_star)
    scale = np.max(np.abs(trace.p_star))
    err = err / scale if scale > 0 else err
    return err if mask is None else err[mask]


def conservation_residual(trace: Trace) -> np.ndarray:
    """Relative gap between the mean of all 2n sub-estimates and eta * x_a, per sample."""
    sc = trace.scenario
    if sc.scheme != "privacy":
        total = trace.xhat.sum(axis=1)
        ref = trace.x.sum(axis=1)
    else:
        total = (trace.est_alpha.sum(axis=1) + trace.est_beta.sum(axis=1)) / (2 * sc.n)
        ref = sc.eta * trace.x_avg
    return np.abs(total - ref) / np.abs(ref)


def disagreement_rate_sup(rates, mask) -> float:
    """sup_t ||(I - 11^T/N) r(t)|| over the window; the measured gamma constant."""
    r = np.asarray(rates)[mask]
    r = r - r.mean(axis=1, keepdims=True)
    return float(np.max(np.linalg.norm(r, axis=1))) if r.size else 0.0


def settled_monotone(values, mask, rtol=1e-9) -> bool:
    v = np.asarray(values)[mask]
    return bool(np.all(np.diff(v) <= rtol * np.max(np.abs(v)) + 0.0))


def metrics(trace: Trace, settle_fraction: float | None = None) -> dict:
    sc = trace.scenario
    frac = sc.settle_fraction if settle_fraction is None else settle_fraction
    mask = settle_mask(trace.t, frac)
    spread = soc_spread(trace)
    track = power_tracking_rel_error(trace)
    out = {
        "scenario": sc.name,
        "scheme": sc.scheme,
        "mode": sc.mode.value,
        "backend": trace.backend,
        "samples": int(trace.t.size),
        "t_final": float(trace.t[-1]),
        "soc_spread_initial": float(spread[0]),
        "soc_spread_final": float(spread[-1]),
        "soc_spread_sup_settled": float(np.max(spread[mask])),
        "soc_spread_monotone_settled": settled_monotone(spread, mask),
        "power_tracking_rel_error": float(np.max(track[mask])),
        "soc_min": float(trace.soc.min()),
        "soc_max": float(trace.soc.max()),
        "floor": float(sc.floor),
        "floor_active_settled": bool(np.any(floor_active(trace.xhat[mask], sc.scale_eta, sc.floor))),
        "conservation_residual_max": float(np.max(conservation_residual(trace))),
        "split_residual_max": float(trace.split_residual),
    }
    L = sc.topology.laplacian
    out["lambda2"] = spectral_summary(L).fiedler if sc.n > 1 else 0.0
    xdot = -trace.p if sc.mode.sign > 0 else trace.p
    out["gamma_s_measured"] = disagreement_rate_sup(xdot, mask)
    eta = sc.scale_eta
    ref = eta * trace.x_avg[:, None]
    out["estimator_error_x"] = float(np.max(np.abs(trace.xhat[mask] - ref[mask])))
    if sc.scheme == "privacy":
        out["estimator_error_x_beta"] = float(np.max(np.abs(trace.est_beta[mask] - ref[mask])))
        out["lambda2_decomposed"] = spectral_summary(decomposed_laplacian(L)).fiedler
    p_target = sc.scale_sigma * trace.p_star / sc.n
    out["estimator_error_p"] = float(np.max(np.abs(trace.phat[mask] - p_target[mask, None])))
    if sc.adversary.enabled:
        obs = trace.observer()
        lk = leakage_metrics(trace.x, obs.xi, trace.p, trace.p_inferred, window=mask)
        out["leakage"] = {
            "per_unit_relative_sup_error": lk.relative_sup_error.tolist(),
            "per_unit_power_rmse": lk.power_rmse.tolist(),
            "per_unit_state_rmse": lk.state_rmse.tolist(),
            **lk.summary(),
            "observer_sup_norm": float(np.max(np.abs(trace.states[:, trace.layout.off_a:]))),
        }
    return out


def flatten(d: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(flatten(v, key + "."))
        elif isinstance(v, list):
            for i, item in enumerate(v):
                flat[f"{key}.{i + 1}"] = item
        else:
            flat[key] = v
    return flat
