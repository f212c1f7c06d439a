"""Numba switch for the hot kernels.

Kernels are written in the subset of numpy that numba understands, so the
same source runs either compiled or as plain numpy. Set
``OPTSTRAT_DISABLE_NUMBA=1`` to force the pure-numpy path (useful for
debugging and for the kernel benchmark). The switch is read once at import.
"""

import os
import warnings

_DISABLE = os.environ.get("OPTSTRAT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    _nb = None
    if not _DISABLE:
        warnings.warn("numba not found, falling back to the numpy kernels")

NUMBA_ENABLED = _nb is not None and not _DISABLE


def njit(func):
    """Compile ``func`` with numba when enabled, otherwise return it unchanged."""
    if NUMBA_ENABLED:
        return _nb.njit(cache=True, nogil=True)(func)
    return func

