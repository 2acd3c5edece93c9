"""numba availability switch.

Set ``BEKKVOL_DISABLE_NUMBA=1`` to force the pure-numpy kernels.
"""
import os

DISABLE_NUMBA = os.environ.get("BEKKVOL_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba_njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLE_NUMBA


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return _numba_njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
