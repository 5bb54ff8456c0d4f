"""Pure-numpy RK4 path, assembled from the public estimator, allocator and observer functions.

Same signature and return convention as ``_kernels.integrate``.
"""

import numpy as np

from ..adversary import AdversaryObserverState, AttackGains, ObservableBundle, observer_rhs
from ..allocator import AllocationInputs, allocate
from ..estimators import DacState, DecomposedState, PowerEstState, SplitGenerator, dac_rhs, decomp_rhs, power_est_rhs
from ..topology import Topology

STATUS_OK = 0
STATUS_SOC_BOUND = 1
STATUS_NONFINITE = 2


def _p_star(t, kind, par, tab_t, tab_v):
    if kind == 0:
        return par[0]
    if kind == 1:
        return par[0] * np.sin(par[2] * t + par[3]) + par[1]
    k = max(int(np.searchsorted(tab_t, t, side="right")) - 1, 0)
    return tab_v[k]


def make_rhs(n, scheme, adv_on, adj, leader, cv, msign, beta, kappa, eta, sigma, floor,
             sp_amp, sp_omega, sp_theta, kind, par, tab_t, tab_v, gains):
    topo = Topology(adj.astype(np.int64), leader.astype(np.int64))
    split = SplitGenerator(theta=sp_theta, omega=sp_omega, amplitude=float(sp_amp), u=np.zeros(n))
    ag = AttackGains(*map(float, gains)) if adv_on else None
    off_p = 2 * n if scheme == 0 else 5 * n
    off_a = off_p + n
    resid = [0.0]

    def rhs(t, y):
        soc = y[:n]
        x = cv * soc if msign > 0 else cv * (1.0 - soc)
        phat = y[off_p:off_p + n]
        tr = y[n:2 * n] if scheme == 0 else y[3 * n:4 * n]
        p = allocate(AllocationInputs(x, tr, phat, floor, eta, sigma))
        xdot = -p if msign > 0 else p
        dy = np.empty_like(y)
        dy[:n] = -p / cv
        if scheme == 0:
            dy[n:2 * n] = dac_rhs(DacState(tr), xdot, topo, beta)
        else:
            st = DecomposedState(y[n:2 * n], y[2 * n:3 * n], y[3 * n:4 * n], y[4 * n:5 * n], eta, split)
            da, db, dea, deb = decomp_rhs(st, xdot, t, topo, beta)
            resid[0] = max(resid[0], float(np.max(np.abs(da + db - 2.0 * eta * xdot))))
            dy[n:2 * n], dy[2 * n:3 * n], dy[3 * n:4 * n], dy[4 * n:5 * n] = da, db, dea, deb
        pstar = _p_star(t, kind, par, tab_t, tab_v)
        dy[off_p:off_p + n] = power_est_rhs(PowerEstState(phat, sigma, kappa), pstar, topo, n)
        if adv_on:
            obs = AdversaryObserverState(*(y[off_a + q * n:off_a + (q + 1) * n] for q in range(4)), gains=ag)
            bundle = ObservableBundle(tr, phat, topo.adjacency, beta, kappa)
            for q, r in enumerate(observer_rhs(obs, bundle)):
                dy[off_a + q * n:off_a + (q + 1) * n] = r
        return dy

    return rhs, resid


def integrate(y0, t0, h, n_steps, sample_every, n, scheme, adv_on, adj, leader, cv, msign,
              beta, kappa, eta, sigma, floor, sp_amp, sp_omega, sp_theta, kind, par, tab_t, tab_v,
              gains, soc_lo, soc_hi, out_t, out_y):
    rhs, resid = make_rhs(n, scheme, adv_on, adj, leader, cv, msign, beta, kappa, eta, sigma, floor,
                          sp_amp, sp_omega, sp_theta, kind, par, tab_t, tab_v, gains)
    y = np.array(y0, dtype=float)
    out_t[0] = t0
    out_y[0] = y
    ns = 1
    t = t0
    for step in range(n_steps):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        new = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(new)):
            return STATUS_NONFINITE, ns, resid[0], t
        if np.any(new[:n] < soc_lo) or np.any(new[:n] > soc_hi):
            return STATUS_SOC_BOUND, ns, resid[0], t
        y = new
        t = t0 + (step + 1) * h
        if (step + 1) % sample_every == 0:
            out_t[ns] = t
            out_y[ns] = y
            ns += 1
    return STATUS_OK, ns, resid[0], t
