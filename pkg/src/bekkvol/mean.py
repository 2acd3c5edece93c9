"""Conditional mean: MA(1) pre-filter and the bivariate VAR(1).

In ``R``, entry ``R[i, j]`` is the effect of lagged series ``j`` on series
``i``; ``r_ij`` in reports refers to ``R[i-1, j-1]``.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from bekkvol import kernels

logger = logging.getLogger(__name__)


class MeanModelError(ValueError):
    pass


@dataclass(frozen=True)
class MaFilterResult:
    theta: float
    mu: float
    residuals: np.ndarray
    loglik: float
    sigma2: float
    converged: bool = True


@dataclass(frozen=True)
class VarMeanParams:
    c: np.ndarray
    R: np.ndarray
    stderr: Optional[dict] = None

    def __post_init__(self):
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.R))):
            raise MeanModelError("VAR parameters must be finite")
        if self.spectral_radius >= 1.0:
            warnings.warn(f"VAR coefficient matrix has spectral radius "
                          f"{self.spectral_radius:.4f} >= 1", RuntimeWarning, stacklevel=3)

    @property
    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.R))))

    @classmethod
    def zero(cls):
        return cls(np.zeros(2), np.zeros((2, 2)))

    def table_order(self):
        """(name, value) pairs in report order: C11, r11, r21, C22, r22, r12."""
        c, R = self.c, self.R
        return [("C11", c[0]), ("r11", R[0, 0]), ("r21", R[1, 0]),
                ("C22", c[1]), ("r22", R[1, 1]), ("r12", R[0, 1])]


@dataclass(frozen=True)
class ResidualPanel:
    eps: np.ndarray
    dates: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.eps.ndim != 2 or self.eps.shape[1] != 2:
            raise MeanModelError("residual panel must be T x 2")
        if not np.all(np.isfinite(self.eps)):
            raise MeanModelError("residual panel contains non-finite values")


def _matrix(panel):
    if isinstance(panel, ResidualPanel):
        return panel.eps, panel.dates
    values = getattr(panel, "values", panel)
    dates = getattr(panel, "dates", None)
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != 2:
        raise MeanModelError("expected a T x 2 panel")
    return values, dates


def _ma1_negll(x, mu, theta):
    e = kernels.ma1_residuals(x, mu, theta)
    s2 = e @ e / len(x)
    return 0.5 * len(x) * (np.log(2 * np.pi) + np.log(s2) + 1.0), e, s2


def fit_ma1(x, theta=None):
    """Conditional-likelihood MA(1) fit of ``x_t = mu + e_t + theta*e_{t-1}``.

    ``e_0 = 0``. Pass ``theta`` to hold the coefficient fixed; with
    ``theta=0`` the residuals are exactly the demeaned input.
    """
    x = np.asarray(getattr(x, "values", x), dtype=float)
    if len(x) < 30:
        raise MeanModelError("fit_ma1 needs T >= 30")
    if theta is not None:
        if abs(theta) >= 1:
            raise MeanModelError("fixed theta must satisfy |theta| < 1")
        if theta == 0.0:
            mu = float(x.mean())
        else:
            res = optimize.minimize_scalar(lambda m: _ma1_negll(x, m, theta)[0],
                                           bracket=(x.mean() - x.std(), x.mean() + x.std()))
            mu = float(res.x)
        nll, e, s2 = _ma1_negll(x, mu, theta)
        return MaFilterResult(float(theta), mu, e, -float(nll), float(s2))

    scale = x.std() or 1.0

    def objective(p):
        return _ma1_negll(x, x.mean() + p[0] * scale, np.tanh(p[1]))[0]

    best = None
    for t0 in (0.0, 0.3, -0.3):
        res = optimize.minimize(objective, np.array([0.0, np.arctanh(t0)]), method="BFGS",
                                options={"gtol": 1e-8})
        if best is None or res.fun < best.fun:
            best = res
    theta_hat = float(np.tanh(best.x[1]))
    if abs(theta_hat) >= 0.999:
        raise MeanModelError(f"MA(1) estimate not invertible (theta={theta_hat:.4f})")
    mu = float(x.mean() + best.x[0] * scale)
    nll, e, s2 = _ma1_negll(x, mu, theta_hat)
    converged = bool(best.success or np.max(np.abs(best.jac)) < 1e-4 * max(1.0, abs(best.fun)))
    if not converged:
        logger.warning("MA(1) optimizer did not converge: %s", best.message)
    return MaFilterResult(theta_hat, mu, e, -float(nll), float(s2), converged)


def fit_var1(panel):
    """Equation-by-equation OLS of each series on a constant and both lags.

    Returns the parameters (with homoskedastic OLS standard errors in
    ``stderr``) and the residual panel, which starts at the second date.
    """
    Y, dates = _matrix(panel)
    T = Y.shape[0]
    if T < 30:
        raise MeanModelError("fit_var1 needs T >= 30")
    X = np.column_stack([np.ones(T - 1), Y[:-1]])
    y = Y[1:]
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise MeanModelError("fit_var1: collinear regressors")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(1, X.shape[0] - X.shape[1])
    XtX_inv = np.linalg.inv(X.T @ X)
    s2 = (resid ** 2).sum(axis=0) / dof
    se = np.sqrt(np.outer(np.diag(XtX_inv), s2))  # rows: const, lag1, lag2; cols: equation
    params = VarMeanParams(c=coef[0].copy(), R=coef[1:].T.copy(),
                           stderr={"c": se[0].copy(), "R": se[1:].T.copy()})
    return params, ResidualPanel(resid, None if dates is None else dates[1:])


def var_residuals(params, panel):
    """``eps_t = R_t - c - R @ R_{t-1}`` for t = 2..T."""
    Y, dates = _matrix(panel)
    eps = Y[1:] - params.c - Y[:-1] @ params.R.T
    return ResidualPanel(eps, None if dates is None else dates[1:])
