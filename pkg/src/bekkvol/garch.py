"""Univariate GARCH(1,1) and bivariate BEKK(1,1) variance machinery.

The BEKK recursion is

    H_t = C'C + A' e_{t-1} e_{t-1}' A + B' H_{t-1} B

with ``C`` upper triangular, ``A`` loading the lagged shocks (ARCH) and ``B``
the lagged covariance (GARCH). The first step uses the pre-sample pair
``(H0, E0)``; ``E0`` defaults to ``H0``.
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import optimize

from bekkvol import kernels
from bekkvol.diagnostics import TestResult, ks_normality, moment_summary

logger = logging.getLogger(__name__)

FLOOR_REL = 1e-10

BEKK_NAMES = ("C11", "C12", "C22", "a11", "a12", "a21", "a22", "b11", "b12", "b21", "b22")


class FilterError(FloatingPointError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class LikelihoodError(ValueError):
    pass


@dataclass(frozen=True)
class GarchParams:
    alpha0: float
    alpha1: float
    beta1: float

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if self.alpha1 < 0 or self.beta1 < 0:
            raise ValueError("alpha1 and beta1 must be nonnegative")

    @property
    def persistence(self):
        return self.alpha1 + self.beta1

    @property
    def stationary(self):
        return self.persistence < 1.0

    @property
    def unconditional_variance(self):
        return self.alpha0 / (1.0 - self.persistence) if self.stationary else np.inf


@dataclass(frozen=True)
class BekkParameters:
    """C (upper triangular), A, B, and an optional Student-t ``nu``."""

    C: np.ndarray
    A: np.ndarray
    B: np.ndarray
    nu: Optional[float] = None

    def __post_init__(self):
        for name in ("C", "A", "B"):
            m = np.array(getattr(self, name), dtype=float)
            if m.shape != (2, 2):
                raise ValueError(f"{name} must be 2x2, got shape {m.shape}")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, m)
        if self.C[1, 0] != 0.0:
            raise ValueError("C must be upper triangular (C[1, 0] == 0)")
        if self.nu is not None and not self.nu > 2:
            raise ValueError("nu must exceed 2")

    n_free = 11

    @property
    def CC(self):
        return self.C.T @ self.C

    def to_vector(self):
        C, A, B = self.C, self.A, self.B
        return np.array([C[0, 0], C[0, 1], C[1, 1],
                         A[0, 0], A[0, 1], A[1, 0], A[1, 1],
                         B[0, 0], B[0, 1], B[1, 0], B[1, 1]])

    @classmethod
    def from_vector(cls, v, nu=None):
        v = np.asarray(v, dtype=float)
        C = np.array([[v[0], v[1]], [0.0, v[2]]])
        return cls(C, v[3:7].reshape(2, 2), v[7:11].reshape(2, 2), nu)

    @classmethod
    def diagonal(cls, c, a, b, nu=None):
        return cls(np.diag(np.broadcast_to(c, 2).astype(float)),
                   np.diag(np.broadcast_to(a, 2).astype(float)),
                   np.diag(np.broadcast_to(b, 2).astype(float)), nu)

    def normalized(self):
        """Observationally equivalent parameters with the sign convention.

        Rows of C are flipped so its diagonal is nonnegative; A and B are
        flipped as whole matrices so their leading diagonal entry (or the
        second one when the first is zero) is nonnegative.
        """
        C = self.C.copy()
        for i in range(2):
            if C[i, i] < 0:
                C[i] = -C[i]

        def flip(M):
            lead = M[0, 0] if M[0, 0] != 0 else M[1, 1]
            return -M if lead < 0 else M.copy()

        return BekkParameters(C, flip(self.A), flip(self.B), self.nu)


@dataclass(frozen=True)
class ConditionalPath:
    dates: Optional[np.ndarray]
    h: np.ndarray  # (n, 3): h11, h12, h22

    @property
    def H(self):
        out = np.empty((len(self.h), 2, 2))
        out[:, 0, 0] = self.h[:, 0]
        out[:, 0, 1] = out[:, 1, 0] = self.h[:, 1]
        out[:, 1, 1] = self.h[:, 2]
        return out

    @property
    def rho(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            r = self.h[:, 1] / np.sqrt(self.h[:, 0] * self.h[:, 2])
        return np.clip(r, -1.0, 1.0)

    def __len__(self):
        return len(self.h)

    def min_eigenvalues(self):
        return np.linalg.eigvalsh(self.H)[:, 0]

    def to_csv(self, path):
        path = Path(path)
        rho = self.rho
        dates = self.dates if self.dates is not None else np.arange(1, len(self) + 1)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "h11", "h12", "h22", "rho"])
            for d, (h11, h12, h22), r in zip(dates, self.h, rho):
                w.writerow([str(d), repr(float(h11)), repr(float(h12)),
                            repr(float(h22)), repr(float(r))])


@dataclass(frozen=True)
class CorrelationSummary:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float
    std: float
    skewness: float
    kurtosis: float
    ks: Optional[TestResult]

    def to_dict(self):
        out = {k: getattr(self, k) for k in
               ("min", "q1", "median", "q3", "max", "mean", "std", "skewness", "kurtosis")}
        out["ks"] = None if self.ks is None else self.ks.to_dict()
        return out


def _eps2(eps):
    eps = np.asarray(getattr(eps, "eps", eps), dtype=float)
    if eps.ndim != 2 or eps.shape[1] != 2:
        raise ValueError("expected a T x 2 residual panel")
    return eps


def default_h0(eps):
    """Sample second-moment matrix of the residual panel."""
    eps = _eps2(eps)
    return eps.T @ eps / len(eps)


def garch11_filter(params, eps, h0=None, e0sq=None):
    """Conditional variance path of a univariate GARCH(1,1)."""
    eps = np.asarray(getattr(eps, "values", eps), dtype=float)
    if h0 is None:
        h0 = float(eps @ eps / len(eps))
    if not h0 > 0:
        raise ValueError("h0 must be positive")
    h = kernels.garch11_recursion(eps, params.alpha0, params.alpha1, params.beta1,
                                  h0, h0 if e0sq is None else e0sq)
    bad = np.flatnonzero(~np.isfinite(h))
    if bad.size:
        raise FilterError(f"non-finite variance at index {bad[0]}", int(bad[0]))
    return h


def bekk_filter(params, eps, H0=None, E0=None, dates=None):
    """Run the BEKK recursion over a T x 2 residual panel."""
    if dates is None:
        dates = getattr(eps, "dates", None)
    eps = _eps2(eps)
    H0 = default_h0(eps) if H0 is None else np.asarray(H0, dtype=float)
    if not np.allclose(H0, H0.T) or np.linalg.eigvalsh(H0)[0] < 0:
        raise ValueError("H0 must be symmetric positive semidefinite")
    E0 = H0 if E0 is None else np.asarray(E0, dtype=float)
    h = kernels.bekk_recursion(eps, params.CC, params.A, params.B, H0, E0)
    bad = np.flatnonzero(~np.isfinite(h).all(axis=1))
    if bad.size:
        raise FilterError(f"non-finite covariance at index {bad[0]}", int(bad[0]))
    return ConditionalPath(dates, h)


def _residuals(eps, mean):
    if mean is None:
        return _eps2(eps)
    from bekkvol.mean import var_residuals

    return var_residuals(mean, eps).eps


def loglik_obs(params, eps, mean=None, H0=None, E0=None, nu=None, floor_rel=FLOOR_REL):
    """Per-observation log-likelihood and the eigenvalue-floor count.

    With ``mean`` given, ``eps`` is a return panel and the VAR residuals
    (first observation dropped) are used. ``nu=None`` means Gaussian.
    """
    e = _residuals(eps, mean)
    H0 = default_h0(e) if H0 is None else np.asarray(H0, dtype=float)
    E0 = H0 if E0 is None else E0
    return kernels.bekk_loglik_obs(e, params.CC, params.A, params.B, H0, E0,
                                   0.0 if nu is None else nu, floor_rel)


def _total(ll, nfloor):
    if not np.all(np.isfinite(ll)):
        raise LikelihoodError("non-finite likelihood contribution")
    if nfloor:
        logger.debug("eigenvalue floor active at %d observations", nfloor)
    return float(ll.sum())


def gaussian_loglik(params, eps, mean=None, H0=None, E0=None):
    """Gaussian log-likelihood summed over observations (larger is better)."""
    return _total(*loglik_obs(params, eps, mean, H0, E0))


def student_t_loglik(params, eps, mean=None, H0=None, E0=None, nu=None):
    """Bivariate Student-t log-likelihood with covariance ``H_t``."""
    nu = params.nu if nu is None else nu
    if nu is None or not nu > 2:
        raise LikelihoodError("Student-t likelihood needs nu > 2")
    return _total(*loglik_obs(params, eps, mean, H0, E0, nu=nu))


def stationarity_check(params):
    """Spectral radius of ``A kron A + B kron B`` and whether it is below 1."""
    M = np.kron(params.A, params.A) + np.kron(params.B, params.B)
    radius = float(np.max(np.abs(np.linalg.eigvals(M))))
    return radius, radius < 1.0


def unconditional_covariance(params):
    """Solve ``S = C'C + A'SA + B'SB``; None when non-stationary."""
    radius, ok = stationarity_check(params)
    if not ok:
        return None
    A, B = params.A, params.B
    M = np.eye(4) - np.kron(A.T, A.T) - np.kron(B.T, B.T)
    s = np.linalg.solve(M, params.CC.reshape(-1, order="F"))
    S = s.reshape(2, 2, order="F")
    return 0.5 * (S + S.T)


def standardized_residuals(eps, path):
    """``z_t = H_t^{-1/2} eps_t`` with the symmetric inverse square root."""
    eps = _eps2(eps)
    w, V = np.linalg.eigh(path.H)
    w = np.maximum(w, FLOOR_REL * w.sum(axis=1, keepdims=True))
    proj = np.einsum("tji,tj->ti", V, eps) / np.sqrt(w)
    return np.einsum("tij,tj->ti", V, proj)


def correlation_summary(path, lilliefors=False):
    rho = path.rho if isinstance(path, ConditionalPath) else np.asarray(path, dtype=float)
    if len(rho) < 8:
        raise ValueError("correlation_summary needs at least 8 observations")
    q1, med, q3 = np.quantile(rho, [0.25, 0.5, 0.75])
    ms = moment_summary(rho)
    ks = ks_normality(rho, lilliefors=lilliefors) if ms.defined else None
    return CorrelationSummary(
        min=float(rho.min()), q1=float(q1), median=float(med), q3=float(q3),
        max=float(rho.max()), mean=ms.mean, std=float(np.sqrt(ms.variance)),
        skewness=ms.skewness if ms.defined else 0.0,
        kurtosis=ms.excess_kurtosis if ms.defined else 0.0,
        ks=ks,
    )


def _garch_from_unconstrained(u, scale):
    # persistence and ARCH share on (0, 1); intercept positive
    p = 1.0 / (1.0 + np.exp(-u[1]))
    s = 1.0 / (1.0 + np.exp(-u[2]))
    return scale * np.exp(u[0]), p * s, p * (1.0 - s)


def fit_garch11(x):
    """Gaussian QML fit of a zero-mean GARCH(1,1); returns (params, converged)."""
    x = np.asarray(getattr(x, "values", x), dtype=float)
    var = float(x @ x / len(x))
    if not var > 0:
        raise ValueError("fit_garch11: zero variance")

    def negll(u):
        a0, a1, b1 = _garch_from_unconstrained(u, var)
        h = kernels.garch11_recursion(x, a0, a1, b1, var, var)
        if not np.all(h > 0):
            return np.inf
        return 0.5 * np.sum(np.log(h) + x ** 2 / h) / len(x)

    # start: alpha1=0.1, beta1=0.8, intercept matching the sample variance
    u0 = np.array([np.log(0.1), np.log(0.9 / 0.1), np.log(0.1 / 0.8)])
    res = optimize.minimize(negll, u0, method="BFGS", options={"gtol": 1e-7})
    a0, a1, b1 = _garch_from_unconstrained(res.x, var)
    ok = bool(np.isfinite(res.fun) and (res.success or np.max(np.abs(res.jac)) < 1e-4))
    return GarchParams(float(a0), float(a1), float(b1)), ok
