"""Numba switch.

Set ``EDMLNGM_DISABLE_NUMBA=1`` to run every kernel through its pure numpy
path. The flag is read once, at import time.
"""

import os

_FLAG = os.environ.get("EDMLNGM_DISABLE_NUMBA", "0").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
