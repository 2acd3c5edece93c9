"""Scalar-loop kernels compiled with numba.

Covariance paths are stored as ``(n, 3)`` arrays of ``(h11, h12, h22)``.
The BEKK update is written out entrywise for the 2x2 case.
"""
import math

import numpy as np

from bekkvol._jit import njit

LOG_2PI = math.log(2.0 * math.pi)


@njit(cache=True)
def _quad(M, s11, s12, s22):
    # M' S M for symmetric S
    m00 = M[0, 0]
    m01 = M[0, 1]
    m10 = M[1, 0]
    m11 = M[1, 1]
    q11 = m00 * m00 * s11 + 2.0 * m00 * m10 * s12 + m10 * m10 * s22
    q12 = m00 * m01 * s11 + (m00 * m11 + m10 * m01) * s12 + m10 * m11 * s22
    q22 = m01 * m01 * s11 + 2.0 * m01 * m11 * s12 + m11 * m11 * s22
    return q11, q12, q22


@njit(cache=True)
def garch11_recursion(eps, alpha0, alpha1, beta1, h0, e0sq):
    n = eps.shape[0]
    h = np.empty(n)
    hp = h0
    ep = e0sq
    for t in range(n):
        hp = alpha0 + alpha1 * ep + beta1 * hp
        h[t] = hp
        ep = eps[t] * eps[t]
    return h


@njit(cache=True)
def bekk_recursion(eps, CC, A, B, H0, E0):
    n = eps.shape[0]
    out = np.empty((n, 3))
    h11 = H0[0, 0]
    h12 = H0[0, 1]
    h22 = H0[1, 1]
    e11 = E0[0, 0]
    e12 = E0[0, 1]
    e22 = E0[1, 1]
    for t in range(n):
        a11, a12, a22 = _quad(A, e11, e12, e22)
        b11, b12, b22 = _quad(B, h11, h12, h22)
        h11 = CC[0, 0] + a11 + b11
        h12 = CC[0, 1] + a12 + b12
        h22 = CC[1, 1] + a22 + b22
        out[t, 0] = h11
        out[t, 1] = h12
        out[t, 2] = h22
        x = eps[t, 0]
        y = eps[t, 1]
        e11 = x * x
        e12 = x * y
        e22 = y * y
    return out


@njit(cache=True)
def _floor_2x2(h11, h12, h22, floor_rel):
    """Lift the smaller eigenvalue to ``floor_rel * trace`` if it falls below."""
    tr = h11 + h22
    half = 0.5 * (h11 - h22)
    disc = math.sqrt(half * half + h12 * h12)
    lmin = 0.5 * tr - disc
    floor = floor_rel * tr
    if lmin >= floor:
        return h11, h12, h22, False
    lift = floor - lmin
    if disc == 0.0:
        return h11 + lift, h12, h22 + lift, True
    v0 = h12
    v1 = lmin - h11
    nrm = v0 * v0 + v1 * v1
    if nrm < 1e-300:
        v0 = lmin - h22
        v1 = h12
        nrm = v0 * v0 + v1 * v1
    return (h11 + lift * v0 * v0 / nrm, h12 + lift * v0 * v1 / nrm,
            h22 + lift * v1 * v1 / nrm, True)


@njit(cache=True)
def bekk_loglik_obs(eps, CC, A, B, H0, E0, nu, floor_rel):
    """Per-observation log density; ``nu <= 0`` selects the Gaussian."""
    H = bekk_recursion(eps, CC, A, B, H0, E0)
    n = eps.shape[0]
    ll = np.empty(n)
    nfloor = 0
    if nu > 0.0:
        const = (math.lgamma(0.5 * (nu + 2.0)) - math.lgamma(0.5 * nu)
                 - math.log(nu * math.pi))
        s = (nu - 2.0) / nu
        log_s2 = 2.0 * math.log(s)
    else:
        const = -LOG_2PI
        s = 1.0
        log_s2 = 0.0
    for t in range(n):
        h11 = H[t, 0]
        h12 = H[t, 1]
        h22 = H[t, 2]
        if not (math.isfinite(h11) and math.isfinite(h12) and math.isfinite(h22)) \
                or h11 + h22 <= 0.0:
            ll[t] = np.nan
            continue
        h11, h12, h22, hit = _floor_2x2(h11, h12, h22, floor_rel)
        if hit:
            nfloor += 1
        det = h11 * h22 - h12 * h12
        x = eps[t, 0]
        y = eps[t, 1]
        q = (h22 * x * x - 2.0 * h12 * x * y + h11 * y * y) / det
        if nu > 0.0:
            ll[t] = const - 0.5 * (math.log(det) + log_s2) \
                - 0.5 * (nu + 2.0) * math.log1p(q / (nu - 2.0))
        else:
            ll[t] = const - 0.5 * (math.log(det) + q)
    return ll, nfloor


@njit(cache=True)
def ma1_residuals(x, mu, theta):
    n = x.shape[0]
    e = np.empty(n)
    prev = 0.0
    for t in range(n):
        prev = x[t] - mu - theta * prev
        e[t] = prev
    return e


@njit(cache=True)
def bekk_simulate(z, c, R, CC, A, B, H0, E0, y0):
    """Simulate VAR(1)-BEKK(1,1) from standardized innovations ``z``.

    The symmetric square root of a 2x2 PSD matrix M is
    (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M)).
    """
    n = z.shape[0]
    eps = np.empty((n, 2))
    y = np.empty((n, 2))
    h = np.empty((n, 3))
    h11 = H0[0, 0]
    h12 = H0[0, 1]
    h22 = H0[1, 1]
    e11 = E0[0, 0]
    e12 = E0[0, 1]
    e22 = E0[1, 1]
    yp0 = y0[0]
    yp1 = y0[1]
    for t in range(n):
        a11, a12, a22 = _quad(A, e11, e12, e22)
        b11, b12, b22 = _quad(B, h11, h12, h22)
        h11 = CC[0, 0] + a11 + b11
        h12 = CC[0, 1] + a12 + b12
        h22 = CC[1, 1] + a22 + b22
        h[t, 0] = h11
        h[t, 1] = h12
        h[t, 2] = h22
        det = h11 * h22 - h12 * h12
        s = math.sqrt(det) if det > 0.0 else 0.0
        tau = math.sqrt(h11 + h22 + 2.0 * s)
        if tau > 0.0:
            r11 = (h11 + s) / tau
            r12 = h12 / tau
            r22 = (h22 + s) / tau
        else:
            r11 = 0.0
            r12 = 0.0
            r22 = 0.0
        x = r11 * z[t, 0] + r12 * z[t, 1]
        w = r12 * z[t, 0] + r22 * z[t, 1]
        eps[t, 0] = x
        eps[t, 1] = w
        e11 = x * x
        e12 = x * w
        e22 = w * w
        y0n = c[0] + R[0, 0] * yp0 + R[0, 1] * yp1 + x
        y1n = c[1] + R[1, 0] * yp0 + R[1, 1] * yp1 + w
        y[t, 0] = y0n
        y[t, 1] = y1n
        yp0 = y0n
        yp1 = y1n
    return y, eps, h
