"""Optional numba acceleration.

Kernels are written once in plain Python/numpy style. When numba is importable
and ``ANISOGABOR_NO_NUMBA`` is unset (or ``0``), they are compiled with
``numba.njit``; otherwise the undecorated functions run as ordinary Python, and
callers pick a vectorized numpy path instead of the scalar loops.
"""

import os

_flag = os.environ.get("ANISOGABOR_NO_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag
    _njit = None
    HAVE_NUMBA = False


def jit(func):
    """Compile ``func`` with ``njit(cache=True)`` when acceleration is enabled."""
    if HAVE_NUMBA:
        return _njit(cache=True)(func)
    return func


def set_threads(n):
    """Cap the number of numba worker threads (no-op without numba)."""
    if HAVE_NUMBA and n:
        import numba

        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def use_numba():
    return HAVE_NUMBA
