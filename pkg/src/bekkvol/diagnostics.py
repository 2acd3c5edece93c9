"""Descriptive statistics and the pre/post-estimation test battery.

Moments use 1/T normalization and kurtosis is reported as excess
(normal = 0); ``raw_kurtosis = excess_kurtosis + 3``.
"""
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import stats


class DiagnosticError(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # keep pytest from collecting this class

    name: str
    statistic: float
    order: int
    p_value: float
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    skewness: Optional[float]
    excess_kurtosis: Optional[float]
    T: int

    @property
    def defined(self):
        """False when the variance is zero and higher moments are undefined."""
        return self.skewness is not None

    @property
    def raw_kurtosis(self):
        return None if self.excess_kurtosis is None else self.excess_kurtosis + 3.0


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple
    values: np.ndarray


@dataclass(frozen=True)
class AcfResult:
    lags: np.ndarray
    coefficients: np.ndarray
    band: float


def _as_1d(x):
    x = np.asarray(getattr(x, "values", x), dtype=float)
    if x.ndim != 1:
        raise DiagnosticError("expected a one-dimensional series")
    if not np.all(np.isfinite(x)):
        raise DiagnosticError("series contains non-finite values")
    return x


def _chi2_sf(stat, df):
    return float(min(1.0, max(0.0, stats.chi2.sf(stat, df))))


def moment_summary(x):
    x = _as_1d(x)
    T = len(x)
    if T < 4:
        raise DiagnosticError("moment_summary needs T >= 4")
    m = x.mean()
    d = x - m
    m2 = np.mean(d ** 2)
    if m2 <= 0.0:
        return MomentSummary(float(m), 0.0, None, None, T)
    m3 = np.mean(d ** 3)
    m4 = np.mean(d ** 4)
    return MomentSummary(float(m), float(m2), float(m3 / m2 ** 1.5), float(m4 / m2 ** 2 - 3.0), T)


def correlation_matrix(panel):
    values = np.asarray(panel.values, dtype=float)
    labels = tuple(panel.names)
    if values.shape[0] < 3:
        raise DiagnosticError("correlation_matrix needs T >= 3")
    d = values - values.mean(axis=0)
    ss = np.sqrt((d ** 2).sum(axis=0))
    zero = [labels[i] for i in np.flatnonzero(ss == 0)]
    if zero:
        raise DiagnosticError(f"zero-variance series: {', '.join(zero)}")
    z = d / ss
    r = z.T @ z
    r = np.clip(0.5 * (r + r.T), -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(labels, r)


def _autocorr(x, K):
    d = x - x.mean()
    denom = d @ d
    if denom == 0.0:
        raise DiagnosticError("zero-variance series")
    return np.array([d[k:] @ d[:-k] for k in range(1, K + 1)]) / denom


def acf(x, K=30):
    """Sample autocorrelations at lags 1..K with the +/-1.96/sqrt(T) band."""
    x = _as_1d(x)
    T = len(x)
    if not 1 <= K < T:
        raise DiagnosticError(f"acf needs 1 <= K < T (K={K}, T={T})")
    return AcfResult(np.arange(1, K + 1), _autocorr(x, K), acf_band(T))


def acf_band(T):
    return 1.96 / np.sqrt(T)


def ljung_box(x, K=24):
    x = _as_1d(x)
    T = len(x)
    if K >= T:
        raise DiagnosticError(f"ljung_box needs T > K (K={K}, T={T})")
    rho = _autocorr(x, K)
    q = T * (T + 2.0) * np.sum(rho ** 2 / (T - np.arange(1, K + 1)))
    return TestResult("ljung_box", float(q), K, _chi2_sf(q, K))


def lm_arch(x, p=24):
    """Engle's LM test: (T - p) * R^2 from regressing x_t^2 on its own p lags."""
    x = _as_1d(x)
    T = len(x)
    if T <= 2 * p + 1:
        raise DiagnosticError(f"lm_arch needs T > 2p + 1 (p={p}, T={T})")
    x2 = x ** 2
    y = x2[p:]
    n = len(y)
    X = np.column_stack([np.ones(n)] + [x2[p - m:T - m] for m in range(1, p + 1)])
    yc = y - y.mean()
    sst = yc @ yc
    if sst <= 1e-300 * max(1.0, y @ y):
        return TestResult("lm_arch", 0.0, p, 1.0)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DiagnosticError("lm_arch: collinear regressors")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    r2 = min(1.0, max(0.0, 1.0 - (resid @ resid) / sst))
    stat = n * r2
    return TestResult("lm_arch", float(stat), p, _chi2_sf(stat, p), {"r_squared": float(r2), "nobs": n})


def jarque_bera(x):
    ms = moment_summary(x)
    if not ms.defined:
        raise DiagnosticError("jarque_bera: zero variance")
    jb = ms.T / 6.0 * (ms.skewness ** 2 + ms.excess_kurtosis ** 2 / 4.0)
    return TestResult("jarque_bera", float(jb), 2, _chi2_sf(jb, 2),
                      {"skewness": ms.skewness, "excess_kurtosis": ms.excess_kurtosis})


def jarque_bera_from_moments(skewness, excess_kurtosis, T):
    """JB statistic from reported moments alone."""
    jb = T / 6.0 * (skewness ** 2 + excess_kurtosis ** 2 / 4.0)
    return TestResult("jarque_bera", float(jb), 2, _chi2_sf(jb, 2))


# MacKinnon (1994) p-value surfaces and MacKinnon (2010) critical-value
# response surfaces, single-series (N = 1) case.
_ADF_TAU_STAR = {"c": -1.61, "ct": -2.89}
_ADF_TAU_MIN = {"c": -18.83, "ct": -16.18}
_ADF_TAU_MAX = {"c": 2.74, "ct": 0.7}
_ADF_SMALLP = {
    "c": np.array([2.1659, 1.4412, 3.8269e-2]),
    "ct": np.array([3.2512, 1.6047, 4.9588e-2]),
}
_ADF_LARGEP = {
    "c": np.array([1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2]),
    "ct": np.array([2.5261, 6.1654e-1, -3.7956e-1, -6.0285e-2]),
}
_ADF_CRIT_2010 = {
    "c": np.array([[-3.43035, -6.5393, -16.786, -79.433],
                   [-2.86154, -2.8903, -4.234, -40.040],
                   [-2.56677, -1.5384, -2.809, 0.0]]),
    "ct": np.array([[-3.95877, -9.0531, -28.428, -134.155],
                    [-3.41049, -4.3904, -9.036, -45.374],
                    [-3.12705, -2.5856, -3.925, -22.380]]),
}


def adf_pvalue(tau, regression="c"):
    if tau > _ADF_TAU_MAX[regression]:
        return 1.0
    if tau < _ADF_TAU_MIN[regression]:
        return 0.0
    coef = _ADF_SMALLP[regression] if tau <= _ADF_TAU_STAR[regression] else _ADF_LARGEP[regression]
    return float(stats.norm.cdf(np.polyval(coef[::-1], tau)))


def adf_critical_values(nobs, regression="c"):
    b = _ADF_CRIT_2010[regression]
    inv = 1.0 / nobs
    cv = b[:, 0] + b[:, 1] * inv + b[:, 2] * inv ** 2 + b[:, 3] * inv ** 3
    return {"1%": float(cv[0]), "5%": float(cv[1]), "10%": float(cv[2])}


def _adf_design(x, lags, regression, start):
    dx = np.diff(x)
    # rows correspond to dx[t] for t >= start (start >= lags)
    idx = np.arange(start, len(dx))
    cols = [x[idx]]
    cols += [dx[idx - j] for j in range(1, lags + 1)]
    cols.append(np.ones(len(idx)))
    if regression == "ct":
        cols.append(idx + 1.0)
    return dx[idx], np.column_stack(cols)


def _ols(y, X):
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DiagnosticError("collinear regressors")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, resid


def adf_test(x, lags=1, regression="c", autolag=None, maxlag=None):
    """Augmented Dickey-Fuller t-test on the lagged level.

    ``regression`` is ``"c"`` (constant) or ``"ct"`` (constant + trend).
    With ``autolag`` in {"aic", "bic"} the lag count is chosen from
    0..maxlag on a common sample, then the test is refit on all usable rows.
    """
    x = _as_1d(x)
    if regression not in ("c", "ct"):
        raise ValueError("regression must be 'c' or 'ct'")
    if autolag is not None:
        maxlag = lags if maxlag is None else maxlag
        if len(x) <= maxlag + 10:
            raise DiagnosticError("adf_test: insufficient sample")
        best = None
        for k in range(maxlag + 1):
            y, X = _adf_design(x, k, regression, maxlag)
            _, resid = _ols(y, X)
            n = len(y)
            pen = 2.0 if autolag == "aic" else np.log(n)
            ic = n * np.log(resid @ resid / n) + pen * X.shape[1]
            if best is None or ic < best[0]:
                best = (ic, k)
        lags = best[1]
    if len(x) <= lags + 10:
        raise DiagnosticError("adf_test: insufficient sample")

    y, X = _adf_design(x, lags, regression, lags)
    beta, resid = _ols(y, X)
    n, k = X.shape
    ssr = resid @ resid
    if ssr <= 1e-20 * max(1.0, y @ y):
        raise DiagnosticError("adf_test: degenerate fit (zero residuals)")
    s2 = ssr / (n - k)
    XtX_inv = np.linalg.inv(X.T @ X)
    tau = beta[0] / np.sqrt(s2 * XtX_inv[0, 0])
    return TestResult("adf", float(tau), lags, adf_pvalue(tau, regression),
                      {"regression": regression, "nobs": n,
                       "critical_values": adf_critical_values(n, regression)})


def _ks_stat(x):
    x = np.sort(x)
    n = len(x)
    z = (x - x.mean()) / x.std()
    cdf = stats.norm.cdf(z)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


@lru_cache(maxsize=64)
def _lilliefors_null(n, n_sim, seed):
    rng = np.random.default_rng(seed)
    draws = np.sort(rng.standard_normal((n_sim, n)), axis=1)
    z = (draws - draws.mean(axis=1, keepdims=True)) / draws.std(axis=1, keepdims=True)
    cdf = stats.norm.cdf(z)
    i = np.arange(1, n + 1)
    d = np.maximum(np.max(i / n - cdf, axis=1), np.max(cdf - (i - 1) / n, axis=1))
    return np.sort(d)


def ks_normality(x, lilliefors=False, n_sim=2000, seed=12345):
    """Kolmogorov-Smirnov distance to a normal with the sample mean and SD.

    By default the p-value is the asymptotic Kolmogorov one, which ignores
    parameter estimation and is conservative. ``lilliefors=True`` instead
    compares against a seeded simulation of the statistic under the
    estimated-parameter null.
    """
    x = _as_1d(x)
    n = len(x)
    if n < 8:
        raise DiagnosticError("ks_normality needs T >= 8")
    if x.std() == 0.0:
        raise DiagnosticError("ks_normality: zero variance")
    d = _ks_stat(x)
    if lilliefors:
        null = _lilliefors_null(n, n_sim, seed)
        exceed = n_sim - np.searchsorted(null, d, side="left")
        p = (exceed + 1.0) / (n_sim + 1.0)
    else:
        p = stats.kstwobign.sf(np.sqrt(n) * d)
    return TestResult("ks_normality", d, n, float(min(1.0, max(0.0, p))), {"lilliefors": bool(lilliefors)})
