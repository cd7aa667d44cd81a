"""Numba dispatch.

Set ``H2MOR_DISABLE_NUMBA=1`` before import to force the pure-numpy kernels.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_DISABLED = os.environ.get("H2MOR_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes", "on")

NUMBA_ENABLED = numba is not None and not _DISABLED


def njit(func):
    """``numba.njit(cache=True)`` if available and enabled, identity otherwise."""
    if not NUMBA_ENABLED:
        return func
    return numba.njit(cache=True)(func)


def backend():
    return "numba" if NUMBA_ENABLED else "numpy"
