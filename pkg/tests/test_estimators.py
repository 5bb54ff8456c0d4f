import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from privbess.errors import ConfigError
from privbess.estimators import (
    DacState,
    DecomposedState,
    PowerEstState,
    SplitGenerator,
    dac_rhs,
    decomp_init,
    decomp_rhs,
    measure_tracking_error,
    power_est_rhs,
    split_rates,
)
from privbess.topology import Topology

RING6 = Topology.ring(6)


def _rk4(f, y, h, steps):
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + h / 2 * k1)
        k3 = f(y + h / 2 * k2)
        k4 = f(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def test_dac_fixed_point():
    rate = dac_rhs(DacState.initial(np.full(6, 3.0)), np.zeros(6), RING6, 10.0)
    np.testing.assert_array_equal(rate, 0.0)


def test_dac_two_node():
    rate = dac_rhs(DacState(np.array([1.0, 0.0])), np.zeros(2), Topology.path(2), 1.0)
    np.testing.assert_array_equal(rate, [-1.0, 1.0])


def test_dac_rejects_wrong_shape():
    with pytest.raises(ValueError):
        dac_rhs(DacState(np.zeros(3)), np.zeros(6), RING6, 1.0)


def test_dac_static_matches_expm():
    rng = np.random.default_rng(3)
    x0 = rng.uniform(1000, 9000, 6)
    beta, h, steps = 2.0, 0.01, 400
    est = _rk4(lambda e: dac_rhs(DacState(e), np.zeros(6), RING6, beta), x0.copy(), h, steps)
    oracle = scipy.linalg.expm(-beta * RING6.laplacian * h * steps) @ x0
    np.testing.assert_allclose(est, oracle, rtol=0, atol=1e-8)


def test_split_generator_seeded():
    a = SplitGenerator.from_seed(6, 11)
    b = SplitGenerator.from_seed(6, 11)
    for f in ("theta", "omega", "u"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    assert not np.array_equal(a.u, SplitGenerator.from_seed(6, 12).u)
    assert np.all(np.abs(a.u) <= 0.5)
    assert np.all((a.omega >= 0.5) & (a.omega <= 2.0))
    r = a.ratio(np.linspace(0, 10, 50)[:, None])
    assert np.all((r >= 0.2) & (r <= 0.8))


def test_split_amplitude_bound():
    with pytest.raises(ValueError):
        SplitGenerator.from_seed(3, 0, amplitude=0.5)


def test_decomp_init_symmetric():
    x0 = np.array([8640.0, 8455.0])
    d = decomp_init(x0, 3.0, SplitGenerator.symmetric(2))
    np.testing.assert_array_equal(d.true_alpha, 3 * x0)
    np.testing.assert_array_equal(d.true_beta, 3 * x0)


def test_decomp_init_sum():
    d = decomp_init(np.array([8640.0]), 3.0, SplitGenerator.from_seed(1, 5))
    assert d.true_alpha[0] + d.true_beta[0] == 51840.0
    assert d.mean_estimate() == pytest.approx(25920.0, rel=1e-15)


def test_decomp_init_deterministic():
    x0 = np.linspace(5000, 9000, 6)
    a = decomp_init(x0, 3.0, SplitGenerator.from_seed(6, 1))
    b = decomp_init(x0, 3.0, SplitGenerator.from_seed(6, 1))
    for f in ("true_alpha", "true_beta", "est_alpha", "est_beta"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


def test_decomp_fixed_point():
    d = decomp_init(np.full(6, 100.0), 2.0, SplitGenerator.symmetric(6))
    for rate in decomp_rhs(d, np.zeros(6), 0.7, RING6, 5.0):
        np.testing.assert_array_equal(rate, 0.0)


def test_decomp_single_node_closed_form():
    x0, delta, beta = 100.0, 7.0, 3.0
    topo = Topology(np.zeros((1, 1)), [1])
    split = SplitGenerator.symmetric(1)

    def f(y):
        st_ = DecomposedState(y[0:1], y[1:2], y[2:3], y[3:4], 1.0, split)
        return np.concatenate(decomp_rhs(st_, np.zeros(1), 0.0, topo, beta))

    y0 = np.array([x0 + delta, x0 - delta, x0 + delta, x0 - delta])
    for T in (0.1, 0.5, 1.0):
        y = _rk4(f, y0, 1e-3, int(round(T / 1e-3)))
        decay = np.exp(-2 * beta * T)
        assert y[2] == pytest.approx(x0 + delta * decay, abs=1e-10)
        assert y[3] == pytest.approx(x0 - delta * decay, abs=1e-10)
    # the only non-zero eigenvalue of the 2x2 estimator block is -2 beta
    A = np.array([[-beta, beta], [beta, -beta]])
    np.testing.assert_allclose(np.linalg.eigvalsh(A), [-2 * beta, 0.0], atol=1e-14)


def test_decomp_conservation_against_quadrature():
    # mean of the 2n sub-estimates equals eta * mean(x(t)) with x(t) = x0 + int xdot
    n, eta, beta = 6, 3.0, 20.0
    x0 = np.linspace(6000, 9000, n)
    w = np.arange(1, n + 1) * 0.3
    split = SplitGenerator.from_seed(n, 4)

    def xdot(t):
        return -500 * np.cos(w * t)

    def f(t, y):
        st_ = DecomposedState(y[:n], y[n:2 * n], y[2 * n:3 * n], y[3 * n:], eta, split)
        return np.concatenate(decomp_rhs(st_, xdot(t), t, RING6, beta))

    d = decomp_init(x0, eta, split)
    y0 = np.concatenate([d.true_alpha, d.true_beta, d.est_alpha, d.est_beta])
    sol = solve_ivp(f, (0, 3), y0, method="DOP853", rtol=1e-12, atol=1e-9, dense_output=True)
    for t in (0.5, 1.5, 3.0):
        y = sol.sol(t)
        x_t = x0 - 500 * np.sin(w * t) / w
        mean_est = (y[2 * n:].sum()) / (2 * n)
        assert mean_est == pytest.approx(eta * x_t.mean(), rel=1e-10)
        np.testing.assert_allclose(y[:n] + y[n:2 * n], 2 * eta * x_t, rtol=1e-10)


@settings(max_examples=200)
@given(st.floats(-1e6, 1e6, allow_subnormal=False), st.floats(0.1, 0.9))
def test_split_rates_exact(total, ratio):
    a, b = split_rates(np.array([total]), np.array([ratio]))
    assert a[0] + b[0] == total


def test_split_rates_shares():
    a, b = split_rates(np.array([10.0, 10.0]), np.array([0.7, 0.3]))
    np.testing.assert_allclose(a, [7.0, 3.0])
    np.testing.assert_allclose(b, [3.0, 7.0])


def test_power_est_fixed_point():
    sigma, p = 4.0, 4200.0
    state = PowerEstState(np.full(6, sigma * p / 6), sigma, 210.0)
    np.testing.assert_array_equal(power_est_rhs(state, p, RING6), 0.0)


def test_power_est_scalar_closed_form():
    sigma, kappa, p = 4.0, 3.0, 700.0
    topo = Topology(np.zeros((1, 1)), [1])

    def f(y):
        return power_est_rhs(PowerEstState(y, sigma, kappa), p, topo)

    for T in (0.2, 1.0):
        y = _rk4(f, np.zeros(1), 1e-3, int(round(T / 1e-3)))
        assert y[0] == pytest.approx(sigma * p * (1 - np.exp(-kappa * T)), rel=1e-11)


def test_power_est_sigma_one_is_plain_law():
    rng = np.random.default_rng(0)
    phat = rng.normal(size=6) * 100
    L, b = RING6.laplacian, RING6.leader
    p = 4200.0
    plain = -210.0 * (L @ phat + b * (phat - p / 6))
    got = power_est_rhs(PowerEstState(phat, 1.0, 210.0), p, RING6)
    np.testing.assert_array_equal(got, plain)


def test_power_est_needs_leader():
    with pytest.raises(ConfigError):
        power_est_rhs(PowerEstState.initial(6), 1.0, Topology.ring(6, leaders=()))


def test_tracking_error_zero_for_exact():
    t = np.linspace(0, 1, 11)
    ref = np.sin(t)
    assert measure_tracking_error(t, np.tile(ref[:, None], (1, 3)), ref) == 0.0


def test_tracking_error_decreases_with_beta():
    # static reference: DAC with a ramp input lags by O(1/beta)
    n = 6
    w = np.linspace(-1, 1, n)

    def err(beta):
        h, steps = 1e-3, 3000
        y = np.zeros(n)
        ts, ests, refs = [], [], []
        for k in range(steps):
            t = k * h
            y = _rk4(lambda e: dac_rhs(DacState(e), 100 * w, RING6, beta), y, h, 1)
            ts.append(t + h)
            ests.append(y.copy())
            refs.append(np.mean(100 * w * (t + h)))
        return measure_tracking_error(np.array(ts), np.array(ests), np.array(refs))

    assert err(20.0) <= err(10.0)
