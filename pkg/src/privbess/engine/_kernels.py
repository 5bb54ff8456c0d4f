"""Fused RK4 kernel for the closed-loop system, compiled with numba.

State layout (n units):

    [0, n)              SoC
    baseline:  [n, 2n)  xhat
    privacy:   [n, 5n)  true alpha, true beta, est alpha, est beta
    next n              phat
    adversary: next 4n  v, xi, phi_prime, z

Must stay numerically equivalent to ``_fallback.py``; the test suite checks
both against each other.
"""

import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_SOC_BOUND = 1
STATUS_NONFINITE = 2


@njit(cache=True)
def _p_star(t, kind, par, tab_t, tab_v):
    if kind == 0:
        return par[0]
    if kind == 1:
        return par[0] * math.sin(par[2] * t + par[3]) + par[1]
    k = 0
    for j in range(tab_t.shape[0]):
        if tab_t[j] <= t:
            k = j
    return tab_v[k]


@njit(cache=True)
def _rhs(t, y, dy, n, scheme, adv_on, adj, leader, cv, msign, beta, kappa, eta, sigma, floor,
         sp_amp, sp_omega, sp_theta, kind, par, tab_t, tab_v, gains):
    """Fill ``dy``; return the largest split-rate identity residual seen (0.0 for baseline)."""
    pa = _p_star(t, kind, par, tab_t, tab_v) / n
    est = n
    off_p = 2 * n if scheme == 0 else 5 * n
    off_a = off_p + n
    resid = 0.0
    xdot = np.empty(n)
    for i in range(n):
        s = y[i]
        x = cv[i] * s if msign > 0 else cv[i] * (1.0 - s)
        if scheme == 0:
            avg = y[est + i] / eta
        else:
            avg = y[3 * n + i] / eta
        denom = floor if floor > avg else avg
        p = x / denom * (y[off_p + i] / sigma)
        dy[i] = -p / cv[i]
        xdot[i] = -p if msign > 0 else p
    if scheme == 0:
        for i in range(n):
            acc = 0.0
            for j in range(n):
                if adj[i, j] != 0.0:
                    acc += y[est + i] - y[est + j]
            dy[est + i] = xdot[i] - beta * acc
    else:
        for i in range(n):
            c = 2.0 * eta * xdot[i]
            rho = 0.5 + sp_amp * math.sin(sp_omega[i] * t + sp_theta[i])
            if rho >= 0.5:
                da = c * rho
                db = c - da
            else:
                db = c * (1.0 - rho)
                da = c - db
            r = abs(da + db - c)
            if r > resid:
                resid = r
            acc = 0.0
            for j in range(n):
                if adj[i, j] != 0.0:
                    acc += y[3 * n + i] - y[3 * n + j]
            gap = y[3 * n + i] - y[4 * n + i]
            dy[n + i] = da
            dy[2 * n + i] = db
            dy[3 * n + i] = da - beta * acc - beta * gap
            dy[4 * n + i] = db + beta * gap
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if adj[i, j] != 0.0:
                acc += y[off_p + i] - y[off_p + j]
        dy[off_p + i] = -kappa * (acc + leader[i] * (y[off_p + i] - sigma * pa))
    if adv_on:
        tr0 = est if scheme == 0 else 3 * n
        k1 = gains[0]
        k2 = gains[1]
        k3 = gains[2]
        k4 = gains[3]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                if adj[i, j] != 0.0:
                    acc += y[tr0 + i] - y[tr0 + j]
            cons = beta * acc
            s = y[tr0 + i]
            v = y[off_a + i]
            xi = y[off_a + n + i]
            phi = k3 * s + y[off_a + 2 * n + i]
            z = y[off_a + 3 * n + i]
            dy[off_a + i] = phi - cons + k1 * (s - v)
            dy[off_a + n + i] = k2 * (s - z - xi) + phi
            dy[off_a + 2 * n + i] = -k3 * (phi - cons) + k4 * (s - v)
            dy[off_a + 3 * n + i] = -cons
    return resid


@njit(cache=True)
def integrate(y0, t0, h, n_steps, sample_every, n, scheme, adv_on, adj, leader, cv, msign,
              beta, kappa, eta, sigma, floor, sp_amp, sp_omega, sp_theta, kind, par, tab_t, tab_v,
              gains, soc_lo, soc_hi, out_t, out_y):
    """Classical RK4 with samples every ``sample_every`` steps.

    Returns ``(status, n_samples, max_split_residual, last_valid_t)``.
    """
    m = y0.shape[0]
    y = y0.copy()
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    out_t[0] = t0
    out_y[0, :] = y
    ns = 1
    resid = 0.0
    t = t0
    for step in range(n_steps):
        r = _rhs(t, y, k1, n, scheme, adv_on, adj, leader, cv, msign, beta, kappa, eta, sigma, floor,
                 sp_amp, sp_omega, sp_theta, kind, par, tab_t, tab_v, gains)
        resid = max(resid, r)
        for q in range(m):
            tmp[q] = y[q] + 0.5 * h * k1[q]
        r = _rhs(t + 0.5 * h, tmp, k2, n, scheme, adv_on, adj, leader, cv, msign, beta, kappa, eta, sigma,
                 floor, sp_amp, sp_omega, sp_theta, kind, par, tab_t, tab_v, gains)
        resid = max(resid, r)
        for q in range(m):
            tmp[q] = y[q] + 0.5 * h * k2[q]
        r = _rhs(t + 0.5 * h, tmp, k3, n, scheme, adv_on, adj, leader, cv, msign, beta, kappa, eta, sigma,
                 floor, sp_amp, sp_omega, sp_theta, kind, par, tab_t, tab_v, gains)
        resid = max(resid, r)
        for q in range(m):
            tmp[q] = y[q] + h * k3[q]
        r = _rhs(t + h, tmp, k4, n, scheme, adv_on, adj, leader, cv, msign, beta, kappa, eta, sigma,
                 floor, sp_amp, sp_omega, sp_theta, kind, par, tab_t, tab_v, gains)
        resid = max(resid, r)
        for q in range(m):
            tmp[q] = y[q] + h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])
        for q in range(m):
            if not math.isfinite(tmp[q]):
                return STATUS_NONFINITE, ns, resid, t
        for i in range(n):
            if tmp[i] < soc_lo[i] or tmp[i] > soc_hi[i]:
                return STATUS_SOC_BOUND, ns, resid, t
        y[:] = tmp
        t = t0 + (step + 1) * h
        if (step + 1) % sample_every == 0:
            out_t[ns] = t
            out_y[ns, :] = y
            ns += 1
    return STATUS_OK, ns, resid, t
