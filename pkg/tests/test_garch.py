import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.special import gammaln

from bekkvol.garch import (BekkParameters, ConditionalPath, FilterError, GarchParams, bekk_filter,
                           correlation_summary, default_h0, fit_garch11, garch11_filter,
                           gaussian_loglik, loglik_obs, standardized_residuals,
                           stationarity_check, student_t_loglik, unconditional_covariance)
from bekkvol.mean import VarMeanParams
from bekkvol.simulate import SimSpec, simulate_bekk, simulate_garch11

from oracles import bekk_oracle


def _random_params(rng, scale=1.0):
    C = np.triu(rng.normal(size=(2, 2))) * scale
    return BekkParameters(C, rng.normal(0, 0.4, (2, 2)), rng.normal(0, 0.6, (2, 2)))


# --- univariate -----------------------------------------------------------------------

def test_garch_constant_when_no_dynamics(rng):
    h = garch11_filter(GarchParams(0.7, 0.0, 0.0), rng.normal(size=20), h0=3.0)
    np.testing.assert_array_equal(h, np.full(20, 0.7))


def test_garch_one_step():
    h = garch11_filter(GarchParams(0.1, 0.2, 0.7), np.array([0.5, 2.0]), h0=1.0, e0sq=1.0)
    assert h[0] == pytest.approx(1.0, abs=1e-15)
    assert h[1] == pytest.approx(0.1 + 0.2 * 0.25 + 0.7 * 1.0, abs=1e-15)


def test_garch_ten_point_oracle():
    eps = np.array([0.3, -1.1, 0.8, 2.5, -0.2, 0.0, -1.7, 0.4, 0.9, -0.6])
    p = GarchParams(0.05, 0.12, 0.83)
    hp, ep = 1.3, 1.3
    expected = []
    for e in eps:
        hp = 0.05 + 0.12 * ep + 0.83 * hp
        expected.append(hp)
        ep = e * e
    np.testing.assert_allclose(garch11_filter(p, eps, h0=1.3), expected, atol=1e-14, rtol=0)


def test_garch_params_properties():
    p = GarchParams(0.1, 0.1, 0.8)
    assert p.stationary and p.unconditional_variance == pytest.approx(1.0)
    assert not GarchParams(0.1, 0.3, 0.8).stationary
    with pytest.raises(ValueError):
        GarchParams(0.0, 0.1, 0.1)


def test_fit_garch11_recovers():
    x = simulate_garch11(GarchParams(0.05, 0.1, 0.85), 3000, seed=2).values
    p, ok = fit_garch11(x)
    assert ok
    assert p.alpha1 == pytest.approx(0.1, abs=0.04)
    assert p.beta1 == pytest.approx(0.85, abs=0.06)


# --- BEKK filter ----------------------------------------------------------------------

def test_bekk_constant_covariance(rng):
    p = BekkParameters(np.array([[1.0, 0.5], [0.0, 2.0]]), np.zeros((2, 2)), np.zeros((2, 2)))
    path = bekk_filter(p, rng.normal(size=(30, 2)))
    np.testing.assert_allclose(path.H, np.broadcast_to(p.CC, (30, 2, 2)), atol=1e-15)


def test_bekk_matches_matrix_oracle(full_bekk, rng):
    eps = rng.normal(size=(50, 2)) * 0.05
    H0 = default_h0(eps)
    path = bekk_filter(full_bekk, eps)
    np.testing.assert_allclose(path.H, bekk_oracle(full_bekk, eps, H0, H0), atol=1e-12, rtol=0)


def test_bekk_block_reduction(rng):
    p = BekkParameters.diagonal([0.3, 0.5], [0.25, 0.35], [0.9, 0.8])
    eps = rng.normal(size=(200, 2))
    H0 = np.array([[1.2, 0.3], [0.3, 0.9]])
    path = bekk_filter(p, eps, H0=H0)
    for i in range(2):
        g = GarchParams(p.C[i, i] ** 2, p.A[i, i] ** 2, p.B[i, i] ** 2)
        np.testing.assert_allclose(path.H[:, i, i], garch11_filter(g, eps[:, i], h0=H0[i, i]),
                                   atol=1e-12, rtol=0)
    # the covariance follows its own scalar recursion
    h12, prev_h, prev_e = [], H0[0, 1], H0[0, 1]
    for e in eps:
        prev_h = 0.25 * 0.35 * prev_e + 0.9 * 0.8 * prev_h
        h12.append(prev_h)
        prev_e = e[0] * e[1]
    np.testing.assert_allclose(path.H[:, 0, 1], h12, atol=1e-12, rtol=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_bekk_psd_preservation(seed):
    rng = np.random.default_rng(seed)
    p = _random_params(rng)
    eps = rng.standard_t(3, size=(60, 2))
    try:
        path = bekk_filter(p, eps)
    except FilterError:
        return  # explosive parameters; nothing to check
    H = path.H
    tr = np.trace(H, axis1=1, axis2=2)
    assert np.all(np.linalg.eigvalsh(H)[:, 0] >= -1e-12 * tr)
    assert np.all(np.abs(path.rho) <= 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.floats(0.01, 100.0))
def test_scale_covariance(seed, lam):
    rng = np.random.default_rng(seed)
    p = BekkParameters(np.triu(rng.uniform(0.1, 1, (2, 2))), rng.normal(0, 0.3, (2, 2)),
                       rng.normal(0, 0.5, (2, 2)))
    eps = rng.normal(size=(80, 2))
    base = bekk_filter(p, eps)
    scaled = bekk_filter(BekkParameters(lam * p.C, p.A, p.B), lam * eps)
    np.testing.assert_allclose(scaled.rho, base.rho, atol=1e-10)
    np.testing.assert_allclose(scaled.h, lam ** 2 * base.h, rtol=1e-10)


def test_bad_h0_rejected(rng):
    with pytest.raises(ValueError):
        bekk_filter(BekkParameters.diagonal(1, 0.1, 0.1), rng.normal(size=(5, 2)),
                    H0=np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_explosive_filter_raises(rng):
    p = BekkParameters.diagonal(1.0, 3.0, 3.0)
    with pytest.raises(FilterError) as err:
        bekk_filter(p, rng.normal(size=(2000, 2)))
    assert err.value.index is not None


# --- likelihoods ----------------------------------------------------------------------

def _const(CC):
    C = np.linalg.cholesky(CC).T
    return BekkParameters(C, np.zeros((2, 2)), np.zeros((2, 2)))


def test_gaussian_closed_forms():
    assert gaussian_loglik(_const(np.eye(2)), np.zeros((1, 2))) == pytest.approx(-math.log(2 * math.pi))
    val = gaussian_loglik(_const(np.diag([4.0, 1.0])), np.array([[2.0, 1.0]]))
    assert val == pytest.approx(-0.5 * (2 * math.log(2 * math.pi) + math.log(4) + 1 + 1))


def test_student_t_at_origin():
    val = student_t_loglik(_const(np.eye(2)), np.zeros((1, 2)), nu=5.0)
    assert val == pytest.approx(gammaln(3.5) - gammaln(2.5) - math.log(3 * math.pi), abs=1e-12)


def _sim_panel(T=20, seed=4):
    p = BekkParameters(np.array([[0.4, 0.1], [0.0, 0.3]]), np.array([[0.3, 0.05], [0.02, 0.25]]),
                       np.array([[0.9, 0.02], [-0.03, 0.92]]))
    mean = VarMeanParams(np.array([0.02, -0.01]), np.array([[0.05, 0.02], [0.01, -0.04]]))
    return p, mean, simulate_bekk(SimSpec(mean, p, T=T, seed=seed)).panel


def test_gaussian_density_oracle():
    p, mean, panel = _sim_panel()
    eps = panel.values[1:] - mean.c - panel.values[:-1] @ mean.R.T
    H0 = default_h0(eps)
    H = bekk_oracle(p, eps, H0, H0)
    ref = sum(stats.multivariate_normal(np.zeros(2), H[t]).logpdf(eps[t]) for t in range(len(eps)))
    assert gaussian_loglik(p, panel.values, mean=mean) == pytest.approx(ref, abs=1e-10)


def test_student_t_density_oracle():
    p, mean, panel = _sim_panel()
    nu = 6.5
    eps = panel.values[1:] - mean.c - panel.values[:-1] @ mean.R.T
    H0 = default_h0(eps)
    H = bekk_oracle(p, eps, H0, H0)
    ref = sum(stats.multivariate_t(np.zeros(2), H[t] * (nu - 2) / nu, df=nu).logpdf(eps[t])
              for t in range(len(eps)))
    assert student_t_loglik(p, panel.values, mean=mean, nu=nu) == pytest.approx(ref, abs=1e-10)


def test_student_t_gaussian_limit():
    p, mean, panel = _sim_panel(T=200)
    g = gaussian_loglik(p, panel.values, mean=mean)
    t = student_t_loglik(p, panel.values, mean=mean, nu=1e6)
    assert abs(t - g) < 1e-3


def test_eigenvalue_floor_is_counted():
    # with C = 0 and a rank-one A, every H_t after the first is singular
    p = BekkParameters(np.zeros((2, 2)), np.array([[1.0, 0.0], [0.0, 0.0]]), np.zeros((2, 2)))
    eps = np.column_stack([np.linspace(1, 2, 10), np.zeros(10)])
    ll, nfloor = loglik_obs(p, eps, H0=np.eye(2))
    assert nfloor > 0
    assert np.all(np.isfinite(ll))


def test_likelihood_prefers_truth():
    p, mean, _ = _sim_panel()
    panel = simulate_bekk(SimSpec(mean, p, T=1000, seed=99)).panel
    base = gaussian_loglik(p, panel.values, mean=mean)
    rng = np.random.default_rng(5)
    wins = 0
    for _ in range(100):
        d = rng.normal(size=11)
        d *= 0.1 / np.linalg.norm(d)
        q = BekkParameters.from_vector(p.to_vector() + d)
        try:
            val = gaussian_loglik(q, panel.values, mean=mean)
        except Exception:
            val = -np.inf
        wins += base > val
    assert wins >= 95


# --- stationarity ---------------------------------------------------------------------

def test_scalar_stationarity():
    r, ok = stationarity_check(BekkParameters.diagonal(0.1, 0.3, 0.9))
    assert r == pytest.approx(0.90) and ok
    r, ok = stationarity_check(BekkParameters.diagonal(0.1, 0.5, 0.9))
    assert r == pytest.approx(1.06) and not ok


def test_full_bekk_radius_against_kron_oracle(full_bekk):
    A, B = full_bekk.A, full_bekk.B
    M = np.kron(A, A) + np.kron(B, B)
    expected = max(abs(np.linalg.eigvals(M)))
    r, _ = stationarity_check(full_bekk)
    assert r == pytest.approx(expected, abs=1e-12)
    assert abs(r - 1.0) < 0.05


def test_unconditional_covariance_fixed_point(rng):
    p = BekkParameters(np.array([[0.5, 0.2], [0.0, 0.4]]), np.array([[0.3, 0.1], [-0.05, 0.25]]),
                       np.array([[0.9, -0.02], [0.04, 0.92]]))
    S = unconditional_covariance(p)
    np.testing.assert_allclose(S, p.CC + p.A.T @ S @ p.A + p.B.T @ S @ p.B, atol=1e-12)
    assert unconditional_covariance(BekkParameters.diagonal(0.1, 0.5, 0.9)) is None


# --- standardization and correlation --------------------------------------------------

def test_standardized_residuals_whiten(rng):
    p, _, _ = _sim_panel()
    eps = rng.normal(size=(40, 2))
    path = bekk_filter(p, eps)
    z = standardized_residuals(eps, path)
    for t in (0, 17, 39):
        w, V = np.linalg.eigh(path.H[t])
        root = V @ np.diag(w ** -0.5) @ V.T
        np.testing.assert_allclose(z[t], root @ eps[t], atol=1e-12)


def test_constant_correlation_summary():
    h = np.tile([1.0, 0.5, 1.0], (100, 1))
    s = correlation_summary(ConditionalPath(None, h))
    assert s.min == s.max == s.mean == pytest.approx(0.5)
    assert s.std == pytest.approx(0.0, abs=1e-15)


def test_summary_quartiles_are_order_statistics(rng):
    p, mean, _ = _sim_panel()
    sim = simulate_bekk(SimSpec(mean, p, T=401, seed=8))
    rho = np.sort(sim.path.rho)
    s = correlation_summary(sim.path)
    assert (s.q1, s.median, s.q3) == (rho[100], rho[200], rho[300])
    assert s.min == rho[0] and s.max == rho[-1]
    assert s.min <= s.q1 <= s.median <= s.q3 <= s.max
    assert s.ks is not None and 0 <= s.ks.p_value <= 1


def test_path_csv(tmp_path, rng):
    p, _, _ = _sim_panel()
    path = bekk_filter(p, rng.normal(size=(5, 2)))
    out = tmp_path / "path.csv"
    path.to_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "date,h11,h12,h22,rho" and len(lines) == 6
    assert float(lines[1].split(",")[4]) == path.rho[0]
