import numpy as np
import pytest

from bekkvol.diagnostics import lm_arch, moment_summary
from bekkvol.garch import BekkParameters, GarchParams, bekk_filter, unconditional_covariance
from bekkvol.ingest import IngestSettings, load_csv, write_csv
from bekkvol.mean import VarMeanParams
from bekkvol.simulate import (SimSpec, SimulationError, simulate_bekk, simulate_garch11,
                              simulate_ma1, standardized_innovations)

FULL = BekkParameters(np.array([[0.4, 0.15], [0.0, 0.3]]), np.array([[0.3, 0.05], [0.02, 0.25]]),
                      np.array([[0.9, 0.02], [-0.03, 0.93]]))


def _frob_rel(S, ref):
    return np.linalg.norm(S - ref) / np.linalg.norm(ref)


def test_constant_covariance_lln(zero_mean):
    C = np.array([[1.0, 0.4], [0.0, 0.7]])
    p = BekkParameters(C, np.zeros((2, 2)), np.zeros((2, 2)))
    y = simulate_bekk(SimSpec(zero_mean, p, T=5000, seed=1)).panel.values
    assert _frob_rel(np.cov(y.T, bias=True), p.CC) < 0.10


def test_seeded_determinism(zero_mean):
    spec = SimSpec(zero_mean, FULL, T=300, seed=42)
    a, b = simulate_bekk(spec), simulate_bekk(spec)
    assert np.array_equal(a.panel.values, b.panel.values)
    assert np.array_equal(a.path.h, b.path.h)
    assert not np.array_equal(a.panel.values,
                              simulate_bekk(SimSpec(zero_mean, FULL, T=300, seed=43)).panel.values)


def test_true_path_reproduced_by_filter():
    mean = VarMeanParams(np.array([0.01, 0.02]), np.array([[0.1, 0.0], [0.05, -0.1]]))
    sim = simulate_bekk(SimSpec(mean, FULL, T=500, seed=3))
    path = bekk_filter(FULL, sim.eps, H0=sim.H0, E0=sim.E0)
    np.testing.assert_allclose(path.h, sim.path.h, atol=1e-10, rtol=0)
    # and the stored shocks are the VAR residuals of the returns
    y = sim.panel.values
    np.testing.assert_allclose(y[1:] - mean.c - y[:-1] @ mean.R.T, sim.eps[1:], atol=1e-12)


def test_no_burn_in_starts_from_unconditional(zero_mean):
    sim = simulate_bekk(SimSpec(zero_mean, FULL, T=10, seed=3, burn_in=0))
    S = unconditional_covariance(FULL)
    np.testing.assert_allclose(sim.H0, S)
    np.testing.assert_allclose(sim.path.H[0], FULL.CC + FULL.A.T @ S @ FULL.A + FULL.B.T @ S @ FULL.B)


@pytest.mark.slow
def test_unconditional_moment_match(zero_mean):
    y = simulate_bekk(SimSpec(zero_mean, FULL, T=50_000, seed=11)).panel.values
    assert _frob_rel(np.cov(y.T, bias=True), unconditional_covariance(FULL)) < 0.10


def test_student_t_innovations_fatter(zero_mean):
    g = simulate_bekk(SimSpec(zero_mean, FULL, T=5000, seed=9)).panel.values
    t = simulate_bekk(SimSpec(zero_mean, FULL, T=5000, seed=9, innovation="student_t", nu=5.0)).panel.values
    for j in range(2):
        assert moment_summary(t[:, j]).excess_kurtosis > moment_summary(g[:, j]).excess_kurtosis + 1.0


def test_innovations_unit_variance():
    z = standardized_innovations(200_000, 5, "student_t", 6.0)
    np.testing.assert_allclose(np.cov(z.T), np.eye(2), atol=0.03)


def test_spec_validation(zero_mean):
    with pytest.raises(ValueError):
        SimSpec(zero_mean, FULL, T=0)
    with pytest.raises(ValueError):
        SimSpec(zero_mean, FULL, T=10, innovation="student_t")
    with pytest.raises(ValueError):
        SimSpec(zero_mean, FULL, T=10, innovation="laplace")


def test_explosive_simulation_raises(zero_mean):
    with pytest.raises(SimulationError):
        simulate_bekk(SimSpec(zero_mean, BekkParameters.diagonal(1.0, 2.0, 2.0), T=2000, seed=1))


def test_business_day_dates(zero_mean):
    sim = simulate_bekk(SimSpec(zero_mean, FULL, T=10, seed=1, origin="2021-06-04"))
    days = sim.panel.dates.astype("datetime64[D]").astype(object)
    assert all(d.weekday() < 5 for d in days)
    assert str(sim.panel.dates[0]) == "2021-06-04"


def test_csv_round_trip(tmp_path, zero_mean):
    sim = simulate_bekk(SimSpec(zero_mean, FULL, T=100, seed=2, names=("a", "b")))
    p = tmp_path / "sim.csv"
    write_csv(p, sim.panel, fmt="%r")
    t = load_csv(p, IngestSettings(default_kind="return"))
    assert np.array_equal(np.column_stack([t.columns["a"], t.columns["b"]]), sim.panel.values)


def test_garch_iid_variance():
    s = simulate_garch11(GarchParams(2.0, 0.0, 0.0), 5000, seed=4)
    assert np.var(s.values) == pytest.approx(2.0, rel=0.10)


def test_garch_determinism_and_variance_path():
    p = GarchParams(0.1, 0.1, 0.8)
    a, h = simulate_garch11(p, 200, seed=6, return_variance=True)
    assert np.array_equal(a.values, simulate_garch11(p, 200, seed=6).values)
    assert h.shape == (200,) and np.all(h >= 0.1)


def test_arch_series_detected():
    s = simulate_garch11(GarchParams(0.2, 0.5, 0.0), 1000, seed=8)
    assert lm_arch(s.values, 24).p_value < 0.05


def test_ma1_simulation_shape():
    s = simulate_ma1(0.5, 500, mu=1.0, seed=2)
    assert len(s.values) == 500 and s.values.mean() == pytest.approx(1.0, abs=0.2)
