"""Numba switch.

Kernels are written once as plain Python over scalars and numpy arrays and
compiled with ``numba.njit`` unless ``WRISTSIM_DISABLE_NUMBA`` is set to a
truthy value (or numba is missing), in which case the same functions run
interpreted. The flag is read once at import time.
"""
from __future__ import annotations

import os

_FLAG = os.environ.get("WRISTSIM_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:  # pragma: no cover - depends on environment
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

NUMBA_ACTIVE = _numba is not None and not DISABLED


def jit(fn):
    """Compile ``fn`` in nopython mode when numba is active."""
    if not NUMBA_ACTIVE:
        return fn
    return _numba.njit(cache=True)(fn)


def backend() -> str:
    return "numba" if NUMBA_ACTIVE else "python"
