"""Seeded simulation of VAR(1)-BEKK(1,1), GARCH(1,1) and MA(1) processes.

Randomness comes from ``numpy.random.Generator(PCG64)``. The seed is split
with ``SeedSequence.spawn`` into one child stream for the Gaussian draws and
one for the chi-square mixing variable of Student-t innovations, so the
Gaussian part of a run is identical whichever innovation is chosen.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from bekkvol import kernels
from bekkvol.garch import BekkParameters, ConditionalPath, stationarity_check, \
    unconditional_covariance
from bekkvol.ingest import AlignedPanel, ReturnSeries, business_days
from bekkvol.mean import VarMeanParams

logger = logging.getLogger(__name__)


class SimulationError(FloatingPointError):
    pass


@dataclass(frozen=True)
class SimSpec:
    mean: VarMeanParams
    bekk: BekkParameters
    T: int
    burn_in: int = 500
    seed: int = 0
    innovation: str = "gaussian"
    nu: Optional[float] = None
    names: tuple = ("y1", "y2")
    origin: str = "2000-01-03"

    def __post_init__(self):
        if self.T < 1 or self.burn_in < 0:
            raise ValueError("need T >= 1 and burn_in >= 0")
        if self.innovation not in ("gaussian", "student_t"):
            raise ValueError(f"unknown innovation {self.innovation!r}")
        if self.innovation == "student_t" and not (self.nu and self.nu > 2):
            raise ValueError("student_t innovations need nu > 2")


@dataclass(frozen=True)
class SimResult:
    panel: AlignedPanel
    eps: np.ndarray
    path: ConditionalPath
    H0: np.ndarray  # pre-sample covariance for the first retained step
    E0: np.ndarray  # pre-sample shock outer product for the first retained step
    spec: SimSpec


def _streams(seed, n=2):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def standardized_innovations(n, seed, innovation="gaussian", nu=None, dim=2):
    """Unit-covariance draws; Student-t rescaled to unit variance."""
    g_norm, g_chi = _streams(seed)
    z = g_norm.standard_normal((n, dim))
    if innovation == "student_t":
        w = g_chi.chisquare(nu, size=n)
        z *= np.sqrt((nu - 2.0) / w)[:, None]
    return z


def simulate_bekk(spec):
    """Simulate returns and the true covariance path from ``spec``."""
    radius, stationary = stationarity_check(spec.bekk)
    if not stationary:
        logger.warning("simulating a non-stationary BEKK (spectral radius %.4f)", radius)
    n = spec.T + spec.burn_in
    z = standardized_innovations(n, spec.seed, spec.innovation, spec.nu)

    S = unconditional_covariance(spec.bekk)
    H0 = spec.bekk.CC.copy() if S is None else S
    try:
        y0 = np.linalg.solve(np.eye(2) - spec.mean.R, spec.mean.c)
    except np.linalg.LinAlgError:
        y0 = np.zeros(2)
    y, eps, h = kernels.bekk_simulate(z, spec.mean.c, spec.mean.R, spec.bekk.CC,
                                      spec.bekk.A, spec.bekk.B, H0, H0, y0)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(h))):
        raise SimulationError(f"explosive simulation path (spectral radius {radius:.4f})")

    b = spec.burn_in
    if b > 0:
        Hp = np.array([[h[b - 1, 0], h[b - 1, 1]], [h[b - 1, 1], h[b - 1, 2]]])
        Ep = np.outer(eps[b - 1], eps[b - 1])
    else:
        Hp, Ep = H0, H0
    dates = business_days(spec.origin, spec.T)
    panel = AlignedPanel(tuple(spec.names), dates, y[b:].copy())
    return SimResult(panel, eps[b:].copy(), ConditionalPath(dates, h[b:].copy()), Hp, Ep, spec)


def simulate_garch11(params, T, seed=0, burn_in=500, name="y", origin="2000-01-03",
                     return_variance=False):
    """Zero-mean Gaussian GARCH(1,1) returns."""
    rng = _streams(seed, 1)[0]
    z = rng.standard_normal(T + burn_in)
    h0 = params.unconditional_variance if params.stationary else params.alpha0
    h = np.empty(T + burn_in)
    e = np.empty(T + burn_in)
    hp, ep = h0, h0
    for t in range(T + burn_in):
        hp = params.alpha0 + params.alpha1 * ep + params.beta1 * hp
        h[t] = hp
        e[t] = np.sqrt(hp) * z[t]
        ep = e[t] ** 2
    if not np.all(np.isfinite(e)):
        raise SimulationError("explosive GARCH simulation")
    series = ReturnSeries(name, business_days(origin, T), e[burn_in:].copy())
    if return_variance:
        return series, h[burn_in:].copy()
    return series


def simulate_ma1(theta, T, mu=0.0, sigma=1.0, seed=0, name="y", origin="2000-01-03"):
    rng = _streams(seed, 1)[0]
    e = sigma * rng.standard_normal(T + 1)
    x = mu + e[1:] + theta * e[:-1]
    return ReturnSeries(name, business_days(origin, T), x)
