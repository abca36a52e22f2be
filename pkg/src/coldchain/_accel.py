"""Optional numba acceleration.

Kernels are written once as plain Python/numpy and compiled with ``numba.njit``
when numba is importable and ``COLDCHAIN_NUMBA`` is not set to ``0``. With the
flag off (or numba missing) the very same functions run interpreted, so both
paths produce the same numbers and can be benchmarked against each other.
"""
from __future__ import annotations

import os

_FLAG = os.environ.get("COLDCHAIN_NUMBA", "1").strip().lower()

try:  # pragma: no cover - depends on the environment
    import numba as _numba
except Exception:  # pragma: no cover
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in ("0", "false", "no", "off")


def maybe_njit(func):
    """Compile ``func`` with ``numba.njit(cache=True)`` when acceleration is on."""
    if USE_NUMBA:
        return _numba.njit(cache=True, nogil=True)(func)
    return func


def kernel_pair(func):
    """Return ``(python_version, compiled_version_or_None)`` for benchmarking."""
    compiled = _numba.njit(cache=True)(func) if NUMBA_AVAILABLE else None
    return func, compiled
