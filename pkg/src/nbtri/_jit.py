"""Optional numba acceleration.

Set ``NBTRI_DISABLE_JIT=1`` to run every kernel as plain Python. Both paths
consume the same pre-drawn uniforms, so their output is identical.
"""
import os

DISABLED = os.environ.get("NBTRI_DISABLE_JIT", "").strip().lower() in {"1", "true", "yes"}

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAS_NUMBA = numba is not None and not DISABLED


def njit(func):
    if HAS_NUMBA:
        return numba.njit(cache=True)(func)
    return func
