"""Kernel backend selection.

Hot loops are compiled with numba when it is importable and the environment
variable ``WEAKBOUND_DISABLE_NUMBA`` is unset (or set to ``0``/``false``).
Otherwise the numpy fallback kernels in :mod:`weakbound.kernels` are used.
The flag is read once, at import time.
"""

import os

_FLAG = os.environ.get("WEAKBOUND_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by WEAKBOUND_DISABLE_NUMBA")
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` in nopython mode, or return ``None`` without numba."""
    if not HAS_NUMBA:
        return None
    return numba.njit(cache=True, nogil=True)(func)
