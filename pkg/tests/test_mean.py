import numpy as np
import pytest

from bekkvol.garch import BekkParameters
from bekkvol.ingest import AlignedPanel
from bekkvol.mean import MeanModelError, VarMeanParams, fit_ma1, fit_var1, var_residuals
from bekkvol.simulate import SimSpec, simulate_bekk, simulate_ma1


def test_ma1_white_noise(rng):
    r = fit_ma1(rng.standard_normal(1000))
    assert abs(r.theta) < 0.1 and r.converged


def test_ma1_recovery():
    x = simulate_ma1(0.174, 2000, mu=0.05, sigma=1.3, seed=3)
    r = fit_ma1(x)
    assert r.theta == pytest.approx(0.174, abs=0.05)
    assert r.sigma2 == pytest.approx(1.3 ** 2, rel=0.1)


def test_ma1_fixed_zero_is_demeaning(rng):
    x = rng.normal(3.0, 2.0, 500)
    r = fit_ma1(x, theta=0.0)
    assert np.max(np.abs(r.residuals - (x - x.mean()))) < 1e-12


def test_ma1_residual_recursion(rng):
    x = rng.normal(size=60)
    r = fit_ma1(x, theta=0.4)
    e = np.empty_like(x)
    prev = 0.0
    for t, v in enumerate(x):
        prev = e[t] = v - r.mu - 0.4 * prev
    np.testing.assert_allclose(r.residuals, e, atol=1e-13)


def test_ma1_rejects_bad_input():
    with pytest.raises(MeanModelError):
        fit_ma1(np.ones(10))
    with pytest.raises(MeanModelError):
        fit_ma1(np.random.default_rng(0).normal(size=100), theta=1.0)


def test_var1_exact_lag_dependence(rng):
    x = rng.normal(size=301)
    Y = np.column_stack([x[1:], x[:-1]])  # y_t = x_{t-1}
    params, res = fit_var1(Y)
    assert params.R[1, 0] == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(res.eps[:, 1])) < 1e-10


def test_var1_iid_data_gives_small_r(rng):
    params, _ = fit_var1(rng.normal(size=(1500, 2)))
    assert np.all(np.abs(params.R) < 2 * params.stderr["R"])


def test_var1_residuals_orthogonal_to_regressors(rng):
    Y = np.cumsum(rng.normal(size=(400, 2)), axis=0) * 0.05 + rng.normal(size=(400, 2))
    _, res = fit_var1(Y)
    Z = np.column_stack([np.ones(399), Y[:-1]])
    assert np.max(np.abs(Z.T @ res.eps) / len(res.eps)) < 1e-8


def test_var_residual_identities(rng):
    Y = rng.normal(size=(50, 2))
    np.testing.assert_array_equal(var_residuals(VarMeanParams.zero(), Y).eps, Y[1:])
    c, R = np.array([0.1, -0.2]), np.array([[0.3, 0.1], [-0.2, 0.5]])
    Z = np.empty((50, 2))
    Z[0] = [1.0, 2.0]
    for t in range(1, 50):
        Z[t] = c + R @ Z[t - 1]
    assert np.max(np.abs(var_residuals(VarMeanParams(c, R), Z).eps)) < 1e-14


def test_var_residuals_by_hand():
    Y = np.array([[1.0, 2.0], [0.5, -1.0], [2.0, 0.0], [-1.5, 1.5], [0.25, 0.75]])
    p = VarMeanParams(np.array([0.1, 0.2]), np.array([[0.5, -0.25], [0.125, 0.75]]))
    expected = []
    for t in range(1, 5):
        y1p, y2p = Y[t - 1]
        expected.append([Y[t, 0] - 0.1 - (0.5 * y1p - 0.25 * y2p),
                         Y[t, 1] - 0.2 - (0.125 * y1p + 0.75 * y2p)])
    np.testing.assert_allclose(var_residuals(p, Y).eps, expected, atol=1e-14, rtol=0)


def test_table_order():
    p = VarMeanParams(np.array([1.0, 2.0]), np.array([[0.11, 0.12], [0.21, 0.22]]))
    assert [n for n, _ in p.table_order()] == ["C11", "r11", "r21", "C22", "r22", "r12"]
    assert [v for _, v in p.table_order()] == [1.0, 0.11, 0.21, 2.0, 0.22, 0.12]


def test_nonstationary_var_warns():
    with pytest.warns(RuntimeWarning):
        VarMeanParams(np.zeros(2), np.eye(2))


def test_var1_recovery_coverage():
    c, R = np.array([0.05, -0.03]), np.array([[0.2, 0.1], [-0.15, 0.3]])
    const = BekkParameters(np.array([[1.0, 0.3], [0.0, 0.8]]), np.zeros((2, 2)), np.zeros((2, 2)))
    truth = np.r_[c, R.ravel()]
    hits = np.zeros(6)
    for i in range(50):
        sim = simulate_bekk(SimSpec(VarMeanParams(c, R), const, T=2000, seed=7000 + i, burn_in=50))
        p, _ = fit_var1(sim.panel)
        est = np.r_[p.c, p.R.ravel()]
        se = np.r_[p.stderr["c"], p.stderr["R"].ravel()]
        hits += np.abs(est - truth) <= 1.96 * se
    assert np.all(hits / 50 >= 0.9), hits


def test_var1_accepts_panel(rng):
    panel = AlignedPanel.from_array(rng.normal(size=(100, 2)))
    p, res = fit_var1(panel)
    assert res.eps.shape == (99, 2)
    np.testing.assert_array_equal(res.dates, panel.dates[1:])
