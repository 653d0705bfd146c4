"""Optional numba acceleration.

Kernels are written once as plain loops and compiled with ``njit`` when numba
is importable and ``RCKELLY_DISABLE_NUMBA`` is unset (or ``0``). Otherwise the
callers in :mod:`rckelly.kernels` use their vectorized numpy implementations.
"""
import os
import warnings

_flag = os.environ.get("RCKELLY_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    _njit = None
    if not DISABLED_BY_ENV:
        warnings.warn("numba is not installed; falling back to numpy kernels")

USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV


def njit(*args, **kw):
    """``numba.njit`` with caching on, or a passthrough without numba."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kw.setdefault("cache", True)
    return _njit(*args, **kw)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
