"""Pure-numpy kernels, same contracts as ``_kernels_numba``.

The recursions cannot be vectorized over time, so the BEKK update loops in
Python with 2x2 matrix products; everything downstream of the path is
vectorized.
"""
import math

import numpy as np
from scipy.signal import lfilter
from scipy.special import gammaln

LOG_2PI = math.log(2.0 * math.pi)


def garch11_recursion(eps, alpha0, alpha1, beta1, h0, e0sq):
    eps = np.asarray(eps, dtype=float)
    drive = alpha0 + alpha1 * np.concatenate(([e0sq], eps[:-1] ** 2))
    h, _ = lfilter([1.0], [1.0, -beta1], drive, zi=[beta1 * h0])
    return h


def bekk_recursion(eps, CC, A, B, H0, E0):
    eps = np.asarray(eps, dtype=float)
    n = eps.shape[0]
    out = np.empty((n, 3))
    At, Bt = A.T, B.T
    H = np.array(H0, dtype=float)
    E = np.array(E0, dtype=float)
    for t in range(n):
        H = CC + At @ E @ A + Bt @ H @ B
        out[t] = H[0, 0], H[0, 1], H[1, 1]
        E = np.outer(eps[t], eps[t])
    return out


def bekk_loglik_obs(eps, CC, A, B, H0, E0, nu, floor_rel):
    eps = np.asarray(eps, dtype=float)
    path = bekk_recursion(eps, CC, A, B, H0, E0)
    H = np.empty((len(path), 2, 2))
    H[:, 0, 0] = path[:, 0]
    H[:, 0, 1] = H[:, 1, 0] = path[:, 1]
    H[:, 1, 1] = path[:, 2]

    bad = ~np.isfinite(path).all(axis=1) | (path[:, 0] + path[:, 2] <= 0)
    H[bad] = np.eye(2)
    w, V = np.linalg.eigh(H)
    floor = floor_rel * (w[:, 0] + w[:, 1])
    hit = w[:, 0] < floor
    w[:, 0] = np.where(hit, floor, w[:, 0])

    logdet = np.log(w).sum(axis=1)
    proj = np.einsum("tji,tj->ti", V, eps)
    q = (proj ** 2 / w).sum(axis=1)
    if nu > 0:
        const = gammaln(0.5 * (nu + 2.0)) - gammaln(0.5 * nu) - math.log(nu * math.pi)
        log_s2 = 2.0 * math.log((nu - 2.0) / nu)
        ll = const - 0.5 * (logdet + log_s2) - 0.5 * (nu + 2.0) * np.log1p(q / (nu - 2.0))
    else:
        ll = -LOG_2PI - 0.5 * (logdet + q)
    ll[bad] = np.nan
    return ll, int(hit[~bad].sum())


def ma1_residuals(x, mu, theta):
    return lfilter([1.0], [1.0, theta], np.asarray(x, dtype=float) - mu)


def _sqrtm_psd(H):
    w, V = np.linalg.eigh(H)
    return (V * np.sqrt(np.maximum(w, 0.0))) @ V.T


def bekk_simulate(z, c, R, CC, A, B, H0, E0, y0):
    n = z.shape[0]
    eps = np.empty((n, 2))
    y = np.empty((n, 2))
    h = np.empty((n, 3))
    H = np.array(H0, dtype=float)
    E = np.array(E0, dtype=float)
    yp = np.array(y0, dtype=float)
    for t in range(n):
        H = CC + A.T @ E @ A + B.T @ H @ B
        h[t] = H[0, 0], H[0, 1], H[1, 1]
        e = _sqrtm_psd(H) @ z[t]
        eps[t] = e
        E = np.outer(e, e)
        yp = c + R @ yp + e
        y[t] = yp
    return y, eps, h
