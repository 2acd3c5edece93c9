"""Quasi-maximum likelihood estimation of VAR(1)-BEKK(1,1).

Fits run on data divided by each series' standard deviation. BEKK is exactly
equivariant under that rescaling (``C -> C D``, ``A -> D^-1 A D``,
``B -> D^-1 B D``, ``c -> D c``, ``R -> D R D^-1``), and the map between the
two parameter vectors is diagonal, so estimates and their covariance are
transformed back entrywise.

The optimizer is BFGS with Armijo backtracking on central finite-difference
gradients, in a space where the diagonal of C passes through softplus and
``nu = 2 + exp(u)``. Convergence means the score criterion holds in original
units: ``max|grad loglik| < gradient_tolerance * max(1, |loglik|)``.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from bekkvol.garch import (BEKK_NAMES, FLOOR_REL, BekkParameters, ConditionalPath, bekk_filter,
                           default_h0, fit_garch11, stationarity_check)
from bekkvol import kernels
from bekkvol.mean import VarMeanParams, fit_var1, var_residuals

logger = logging.getLogger(__name__)

MEAN_NAMES = ("C11", "r11", "r21", "C22", "r22", "r12")
# Beyond this the t density is numerically Gaussian at any usable T; on
# Gaussian data the t likelihood keeps rising in nu and BFGS would chase it.
NU_MAX = 1000.0
_U_NU_MAX = float(np.log(NU_MAX - 2.0))


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 500
    gradient_tolerance: float = 1e-5
    step_tolerance: float = 1e-12
    fd_step: float = 1e-5
    hessian_step: float = 1e-4
    restarts: int = 2
    seed: int = 0
    jitter: float = 0.1

    def __post_init__(self):
        for name in ("max_iterations", "gradient_tolerance", "step_tolerance", "fd_step",
                     "hessian_step", "jitter"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")


@dataclass(frozen=True)
class SandwichResult:
    cov: np.ndarray
    se: np.ndarray
    hessian_cov: np.ndarray
    hessian_se: np.ndarray
    hessian_cond: float
    negative_definite: bool


@dataclass
class EstimationResult:
    mean: VarMeanParams
    bekk: BekkParameters
    loglik: float
    names: tuple
    params: np.ndarray
    robust_se: np.ndarray
    robust_t: np.ndarray
    hessian_se: np.ndarray
    hessian_cond: float
    hessian_negative_definite: bool
    iterations: int
    converged: bool
    distribution: str
    mean_mode: str
    nobs: int
    max_score: float
    floor_count: int
    stationarity_radius: float
    message: str = ""
    history: list = field(default_factory=list, repr=False)
    path: Optional[ConditionalPath] = field(default=None, repr=False)
    eps: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def nu(self):
        return self.bekk.nu

    def param(self, name):
        i = self.names.index(name)
        return self.params[i], self.robust_se[i], self.robust_t[i]


def _softplus(x):
    return np.logaddexp(0.0, x)


def _softplus_inv(y):
    y = np.asarray(y, dtype=float)
    return np.where(y > 30.0, y + np.log(-np.expm1(-np.minimum(y, 700.0))), np.log(np.expm1(np.minimum(y, 30.0))))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class BekkProblem:
    """Likelihood of one bivariate panel under a fixed layout.

    The natural parameter vector is ``[mean (6, joint mode only), bekk (11),
    nu (student_t only)]`` with mean entries in report order.
    """

    def __init__(self, Y, distribution="gaussian", mean_mode="joint", fixed_mean=None,
                 floor_rel=FLOOR_REL):
        if distribution not in ("gaussian", "student_t"):
            raise ValueError(f"unknown distribution {distribution!r}")
        if mean_mode not in ("joint", "two_step"):
            raise ValueError(f"unknown mean mode {mean_mode!r}")
        self.Y = np.ascontiguousarray(Y, dtype=float)
        self.distribution = distribution
        self.mean_mode = mean_mode
        self.floor_rel = floor_rel
        if mean_mode == "two_step":
            if fixed_mean is None:
                raise ValueError("two_step mode needs fixed_mean")
            self.fixed_mean = fixed_mean
            self._eps_fixed = var_residuals(fixed_mean, self.Y).eps
            self._H0_fixed = default_h0(self._eps_fixed)
        self.nmean = 6 if mean_mode == "joint" else 0
        self.k = self.nmean + 11 + (1 if distribution == "student_t" else 0)
        self.nobs = self.Y.shape[0] - 1
        self.positive = np.array([self.nmean + 0, self.nmean + 2])
        self.nu_index = self.k - 1 if distribution == "student_t" else None

    @property
    def names(self):
        out = [f"mean.{n}" for n in MEAN_NAMES] if self.nmean else []
        out += [f"var.{n}" for n in BEKK_NAMES]
        if self.nu_index is not None:
            out.append("nu")
        return tuple(out)

    def pack(self, mean, bekk, nu=None):
        parts = []
        if self.nmean:
            parts.append([v for _, v in mean.table_order()])
        parts.append(bekk.to_vector())
        if self.nu_index is not None:
            parts.append([nu if nu is not None else bekk.nu])
        return np.concatenate(parts).astype(float)

    def unpack(self, theta):
        """``((c, R), C, A, B, nu)`` from a natural parameter vector."""
        theta = np.asarray(theta, dtype=float)
        if self.nmean:
            c1, r11, r21, c2, r22, r12 = theta[:6]
            mean = (np.array([c1, c2]), np.array([[r11, r12], [r21, r22]]))
        else:
            mean = (self.fixed_mean.c, self.fixed_mean.R)
        v = theta[self.nmean:self.nmean + 11]
        C = np.array([[v[0], v[1]], [0.0, v[2]]])
        A = v[3:7].reshape(2, 2)
        B = v[7:11].reshape(2, 2)
        nu = float(theta[self.nu_index]) if self.nu_index is not None else None
        return mean, C, A, B, nu

    def residuals(self, theta):
        if self.nmean == 0:
            return self._eps_fixed, self._H0_fixed
        c, R = self.unpack(theta)[0]
        eps = self.Y[1:] - c - self.Y[:-1] @ R.T
        return eps, eps.T @ eps / len(eps)

    def loglik_obs(self, theta):
        mean, C, A, B, nu = self.unpack(theta)
        if nu is not None and not nu > 2:
            return np.full(self.nobs, np.nan), 0
        if not np.all(np.isfinite(theta)):
            return np.full(self.nobs, np.nan), 0
        eps, H0 = self.residuals(theta)
        return kernels.bekk_loglik_obs(eps, C.T @ C, A, B, H0, H0, nu or 0.0, self.floor_rel)

    def loglik(self, theta):
        ll, _ = self.loglik_obs(theta)
        s = ll.sum()
        return s if np.isfinite(s) else -np.inf

    # unconstrained <-> natural
    def to_unconstrained(self, theta):
        u = np.array(theta, dtype=float)
        u[self.positive] = _softplus_inv(u[self.positive])
        if self.nu_index is not None:
            u[self.nu_index] = min(np.log(u[self.nu_index] - 2.0), _U_NU_MAX)
        return u

    def from_unconstrained(self, u):
        theta = np.array(u, dtype=float)
        theta[self.positive] = _softplus(theta[self.positive])
        if self.nu_index is not None:
            theta[self.nu_index] = 2.0 + np.exp(min(theta[self.nu_index], _U_NU_MAX))
        return theta

    def dtheta_du(self, u):
        d = np.ones_like(u)
        d[self.positive] = _sigmoid(u[self.positive])
        if self.nu_index is not None:
            un = u[self.nu_index]
            d[self.nu_index] = np.exp(un) if un < _U_NU_MAX else 0.0
        return d

    def normalize(self, theta):
        mean, C, A, B, nu = self.unpack(theta)
        b = BekkParameters(C, A, B, nu).normalized()
        out = np.array(theta, dtype=float)
        out[self.nmean:self.nmean + 11] = b.to_vector()
        return out


def _scale_factors(problem_layout_nmean, d, k, nu_index):
    """Diagonal of the linear map scaled-natural -> original-natural."""
    d1, d2 = d
    mean = [d1, 1.0, d2 / d1, d2, 1.0, d1 / d2] if problem_layout_nmean else []
    # C_ij scales with d_j; A_ij, B_ij with d_j / d_i
    var = [d1, d2, d2, 1.0, d2 / d1, d1 / d2, 1.0, 1.0, d2 / d1, d1 / d2, 1.0]
    out = np.array(mean + var + ([1.0] if nu_index is not None else []))
    assert len(out) == k
    return out


def central_gradient(f, x, step, scale=None):
    """Central-difference gradient with steps ``step * max(|x_i|, scale_i)``."""
    x = np.asarray(x, dtype=float)
    scale = np.ones_like(x) if scale is None else scale
    h = step * np.maximum(np.abs(x), scale)
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h[i])
    return g


def sandwich_covariance(loglik_obs, theta, fd_step=1e-5, hessian_step=1e-4, scale=None):
    """Bollerslev-Wooldridge covariance ``A^-1 S A^-1 / n``.

    ``loglik_obs(theta)`` returns the per-observation log-likelihood vector.
    ``A`` is the average negative Hessian (central second differences of the
    summed log-likelihood) and ``S`` the average outer product of the
    per-observation scores. If ``A`` is not positive definite a
    pseudo-inverse is used and ``negative_definite`` is False.
    """
    theta = np.asarray(theta, dtype=float)
    k = len(theta)
    scale = np.ones(k) if scale is None else np.asarray(scale, dtype=float)
    l0 = np.asarray(loglik_obs(theta), dtype=float)
    n = len(l0)

    hs = fd_step * np.maximum(np.abs(theta), scale)
    scores = np.empty((n, k))
    for j in range(k):
        e = np.zeros(k)
        e[j] = hs[j]
        scores[:, j] = (loglik_obs(theta + e) - loglik_obs(theta - e)) / (2.0 * hs[j])

    f = lambda t: float(np.sum(loglik_obs(t)))
    f0 = float(l0.sum())
    hh = hessian_step * np.maximum(np.abs(theta), scale)
    H = np.empty((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = hh[i]
        H[i, i] = (f(theta + ei) - 2.0 * f0 + f(theta - ei)) / hh[i] ** 2
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = hh[j]
            H[i, j] = H[j, i] = (f(theta + ei + ej) - f(theta + ei - ej)
                                 - f(theta - ei + ej) + f(theta - ei - ej)) / (4.0 * hh[i] * hh[j])

    A = -H / n
    A = 0.5 * (A + A.T)
    S = scores.T @ scores / n
    w = np.linalg.eigvalsh(A)
    negdef = bool(w[0] > 0)
    if negdef:
        Ainv = np.linalg.inv(A)
        cond = float(w[-1] / w[0])
    else:
        Ainv = np.linalg.pinv(A)
        cond = float("inf")
    cov = Ainv @ S @ Ainv / n
    hcov = Ainv / n
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    hse = np.sqrt(np.clip(np.diag(hcov), 0.0, None))
    return SandwichResult(cov, se, hcov, hse, cond, negdef)


def start_values(panel, distribution="gaussian"):
    """Starting point: OLS VAR mean, per-series GARCH(1,1) for diagonal A and B,
    and C matching the residual covariance. Returns ``(mean, bekk)``."""
    Y = np.asarray(getattr(panel, "values", panel), dtype=float)
    mean, resid = fit_var1(Y)
    eps = resid.eps
    Sigma = np.cov(eps.T, bias=True)
    a = np.empty(2)
    b = np.empty(2)
    for i in range(2):
        try:
            g, ok = fit_garch11(eps[:, i] - eps[:, i].mean())
        except (ValueError, FloatingPointError):
            ok = False
        if ok and g.alpha1 + g.beta1 < 0.999:
            a[i], b[i] = np.sqrt(g.alpha1), np.sqrt(g.beta1)
        else:
            logger.info("univariate GARCH seed failed for series %d; using defaults", i + 1)
            a[i], b[i] = 0.3, 0.9
    M = Sigma * (1.0 - np.outer(a, a) - np.outer(b, b))
    if np.linalg.eigvalsh(M)[0] <= 1e-8 * np.trace(M):
        M = np.diag(np.maximum(np.diag(M), 1e-4 * np.diag(Sigma)))
    C = np.linalg.cholesky(M).T
    nu = 8.0 if distribution == "student_t" else None
    return mean, BekkParameters(C, np.diag(a), np.diag(b), nu)


@dataclass
class _Run:
    u: np.ndarray
    f: float
    iterations: int
    converged: bool
    history: list
    message: str


def _bfgs(fun, grad, u0, max_iter, done, step_tol):
    """Minimize ``fun`` from ``u0``; ``done(u, f, g)`` is the convergence test.

    Steps are accepted only under the Armijo condition, so the accepted
    objective values never increase.
    """
    u = np.array(u0, dtype=float)
    f = fun(u)
    if not np.isfinite(f):
        return _Run(u, f, 0, False, [f], "non-finite objective at start")
    g = grad(u)
    history = [f]
    n = len(u)
    Hinv = np.eye(n)
    fresh = True
    for it in range(max_iter):
        if done(u, f, g):
            return _Run(u, f, it, True, history, "score criterion met")
        p = -Hinv @ g
        if g @ p >= 0:
            Hinv, fresh = np.eye(n), True
            p = -g
        if fresh:
            p *= min(1.0, 0.5 / max(np.max(np.abs(p)), 1e-300))
        slope = g @ p
        alpha, accepted = 1.0, False
        for _ in range(60):
            u_new = u + alpha * p
            f_new = fun(u_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if not fresh:
                Hinv, fresh = np.eye(n), True
                continue
            return _Run(u, f, it, done(u, f, g), history, "line search failed")
        s = u_new - u
        g_new = grad(u_new)
        y = g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if fresh:
                Hinv = np.eye(n) * (sy / (y @ y))
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(s, y)
            Hinv = V @ Hinv @ V.T + rho * np.outer(s, s)
            fresh = False
        small = np.max(np.abs(s)) < step_tol * max(1.0, np.max(np.abs(u))) and abs(f - f_new) <= 1e-15 * max(1.0, abs(f))
        u, f, g = u_new, f_new, g_new
        history.append(f)
        if small:
            if not fresh and not done(u, f, g):
                Hinv, fresh = np.eye(n), True  # stale curvature, e.g. along a flat nu
                continue
            return _Run(u, f, it + 1, done(u, f, g), history, "step tolerance reached")
    return _Run(u, f, max_iter, done(u, f, g), history, "iteration limit reached")


def _as_pair(panel):
    if hasattr(panel, "values") and hasattr(panel, "dates"):
        Y = np.asarray(panel.values, dtype=float)
        dates = panel.dates
    else:
        Y = np.asarray(panel, dtype=float)
        dates = None
    if Y.ndim != 2 or Y.shape[1] != 2:
        raise EstimationError("fit_bekk needs a T x 2 panel")
    if not np.all(np.isfinite(Y)):
        raise EstimationError("panel contains non-finite values")
    return Y, dates


def fit_bekk(panel, settings=None, distribution="gaussian", mean_mode="joint", start=None,
             return_path=True):
    """Fit VAR(1)-BEKK(1,1) by (quasi-)maximum likelihood.

    ``start`` may be an :class:`EstimationResult` or a ``(mean, bekk)`` pair;
    otherwise :func:`start_values` is used. Non-convergence is reported in
    the result, never raised.
    """
    settings = settings or OptimizerSettings()
    Y, dates = _as_pair(panel)
    T = Y.shape[0]
    if T < 100:
        raise EstimationError(f"fit_bekk needs T >= 100, got {T}")
    if T < 250:
        logger.warning("fit_bekk: short sample (T=%d); estimates may be unreliable", T)

    d = Y.std(axis=0)
    if np.any(d == 0):
        raise EstimationError("zero-variance series in panel")
    Ys = Y / d

    if start is None:
        mean0, bekk0 = start_values(Y, distribution)
    elif isinstance(start, EstimationResult):
        mean0, bekk0 = start.mean, start.bekk
    else:
        mean0, bekk0 = start
    if distribution == "student_t" and bekk0.nu is None:
        bekk0 = BekkParameters(bekk0.C, bekk0.A, bekk0.B, 8.0)

    fixed = None
    if mean_mode == "two_step":
        fixed = fit_var1(Y)[0]
    orig = BekkProblem(Y, distribution, mean_mode, fixed)
    fixed_s = None if fixed is None else VarMeanParams(fixed.c / d, fixed.R * d[None, :] / d[:, None])
    prob = BekkProblem(Ys, distribution, mean_mode, fixed_s)
    lscale = _scale_factors(prob.nmean, d, prob.k, prob.nu_index)
    ll_shift = -prob.nobs * np.log(d[0] * d[1])

    theta0 = orig.pack(mean0, bekk0) / lscale
    u0 = prob.to_unconstrained(theta0)
    n = prob.nobs

    def fun(u):
        val = prob.loglik(prob.from_unconstrained(u))
        return -val / n if np.isfinite(val) else np.inf

    def grad(u):
        return central_gradient(fun, u, settings.fd_step)

    def done(u, f, g):
        ll = -f * n + ll_shift
        dt = prob.dtheta_du(u)
        g_orig = np.divide(-g * n, dt * lscale, out=np.zeros_like(g), where=dt != 0)
        return np.max(np.abs(g_orig)) < settings.gradient_tolerance * max(1.0, abs(ll))

    rng = np.random.default_rng(settings.seed)
    starts = [u0] + [u0 + rng.normal(0.0, settings.jitter, size=len(u0))
                     for _ in range(settings.restarts)]
    runs = []
    for i, us in enumerate(starts):
        if not np.isfinite(fun(us)):
            logger.info("start %d has non-finite likelihood; skipped", i)
            continue
        runs.append(_bfgs(fun, grad, us, settings.max_iterations, done, settings.step_tolerance))
    if not runs:
        raise EstimationError("likelihood non-finite at all start points")

    def key(r):
        return (round(r.f, 9), float(np.linalg.norm(prob.from_unconstrained(r.u))))

    best = min(runs, key=key)
    theta_s = prob.normalize(prob.from_unconstrained(best.u))
    theta = theta_s * lscale

    sw = sandwich_covariance(lambda t: prob.loglik_obs(t)[0], theta_s,
                             settings.fd_step, settings.hessian_step)
    se = sw.se * lscale
    hse = sw.hessian_se * lscale
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = np.where(se > 0, theta / se, np.nan)

    ll_obs, nfloor = orig.loglik_obs(theta)
    loglik = float(ll_obs.sum())
    g_orig = central_gradient(orig.loglik, theta, settings.fd_step, scale=lscale)
    max_score = float(np.max(np.abs(g_orig)))
    converged = bool(best.converged and np.isfinite(loglik)
                     and max_score < settings.gradient_tolerance * max(1.0, abs(loglik)))

    (c, R), C, A, B, nu = orig.unpack(theta)
    message = best.message
    if nu is not None and nu >= NU_MAX * (1 - 1e-9):
        message += f"; nu at its upper bound {NU_MAX:g}"
    mean = VarMeanParams(c, R) if orig.nmean else fixed
    bekk = BekkParameters(C, A, B, nu)
    radius, _ = stationarity_check(bekk)
    if orig.nmean == 0:
        # two-step: mean inference is the homoskedastic OLS one
        stderr = fixed.stderr
        mean_se = np.array([stderr["c"][0], stderr["R"][0, 0], stderr["R"][1, 0],
                            stderr["c"][1], stderr["R"][1, 1], stderr["R"][0, 1]])
        mean_vals = np.array([v for _, v in fixed.table_order()])
        names = tuple(f"mean.{m}" for m in MEAN_NAMES) + orig.names
        theta_all = np.concatenate([mean_vals, theta])
        se = np.concatenate([mean_se, se])
        hse = np.concatenate([mean_se, hse])
        tstat = np.concatenate([mean_vals / mean_se, tstat])
    else:
        names, theta_all = orig.names, theta

    eps, H0 = orig.residuals(theta)
    path = None
    if return_path:
        path = bekk_filter(bekk, eps, H0=H0, dates=None if dates is None else dates[1:])

    if not converged:
        logger.warning("BEKK fit did not converge (%s; max score %.3g)", message, max_score)
    return EstimationResult(
        mean=mean, bekk=bekk, loglik=loglik, names=names, params=theta_all,
        robust_se=se, robust_t=tstat, hessian_se=hse, hessian_cond=sw.hessian_cond,
        hessian_negative_definite=sw.negative_definite, iterations=best.iterations,
        converged=converged, distribution=distribution, mean_mode=mean_mode, nobs=orig.nobs,
        max_score=max_score, floor_count=nfloor, stationarity_radius=radius,
        message=message, history=best.history, path=path, eps=eps,
    )


def score_check(result, panel, step=1e-5):
    """Central-difference gradient of the total log-likelihood at the estimate,
    in the estimated (natural, original-unit) parameters."""
    Y, _ = _as_pair(panel)
    fixed = fit_var1(Y)[0] if result.mean_mode == "two_step" else None
    prob = BekkProblem(Y, result.distribution, result.mean_mode, fixed)
    theta = prob.pack(result.mean, result.bekk)
    d = Y.std(axis=0)
    scale = _scale_factors(prob.nmean, d, prob.k, prob.nu_index)
    return central_gradient(prob.loglik, theta, step, scale=scale)
