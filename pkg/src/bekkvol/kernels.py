"""Kernel dispatch: numba when available and not disabled, numpy otherwise.

Both implementations are importable directly (``numba_kernels``,
``numpy_kernels``) for cross-checking and benchmarking.
"""
import numpy as np

from bekkvol import _kernels_numba as numba_kernels
from bekkvol import _kernels_numpy as numpy_kernels
from bekkvol._jit import USE_NUMBA

_impl = numba_kernels if USE_NUMBA else numpy_kernels
BACKEND = "numba" if USE_NUMBA else "numpy"


def _f(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def garch11_recursion(eps, alpha0, alpha1, beta1, h0, e0sq):
    """Variance path ``h_t = alpha0 + alpha1*eps_{t-1}^2 + beta1*h_{t-1}``.

    ``e0sq`` is the pre-sample squared residual.
    """
    return _impl.garch11_recursion(_f(eps), float(alpha0), float(alpha1),
                                   float(beta1), float(h0), float(e0sq))


def bekk_recursion(eps, CC, A, B, H0, E0):
    """BEKK(1,1) covariance path as an ``(n, 3)`` array of (h11, h12, h22).

    ``H_t = CC + A' E_{t-1} A + B' H_{t-1} B`` with ``E_t = eps_t eps_t'`` and
    ``E0`` the pre-sample outer product.
    """
    return _impl.bekk_recursion(_f(eps), _f(CC), _f(A), _f(B), _f(H0), _f(E0))


def bekk_loglik_obs(eps, CC, A, B, H0, E0, nu=0.0, floor_rel=1e-10):
    """Per-observation log-likelihood and eigenvalue-floor activation count."""
    ll, nfloor = _impl.bekk_loglik_obs(_f(eps), _f(CC), _f(A), _f(B), _f(H0),
                                       _f(E0), float(nu), float(floor_rel))
    return ll, int(nfloor)


def ma1_residuals(x, mu, theta):
    return _impl.ma1_residuals(_f(x), float(mu), float(theta))


def bekk_simulate(z, c, R, CC, A, B, H0, E0, y0):
    """Returns ``(y, eps, h)`` for standardized innovations ``z``."""
    return _impl.bekk_simulate(_f(z), _f(c), _f(R), _f(CC), _f(A), _f(B),
                               _f(H0), _f(E0), _f(y0))
