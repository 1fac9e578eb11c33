"""Numba switch.

Set ``BERTRAND_MFG_DISABLE_NUMBA=1`` to run the pure numpy/scipy kernels, e.g.
when numba is unavailable or to cross-check the compiled path.
"""

import os

_disabled = os.environ.get("BERTRAND_MFG_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _disabled


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    kwargs.setdefault("cache", True)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn
    return _njit(*args, **kwargs)
