"""Optional numba acceleration.

Set ``GENEAPERC_DISABLE_JIT=1`` to run every kernel through its pure
numpy/Python fallback. Both paths consume the random stream identically, so
results do not depend on the flag.
"""

from __future__ import annotations

import logging
import os

_FALSY = {"", "0", "false", "no", "off"}


def jit_disabled() -> bool:
    return os.environ.get("GENEAPERC_DISABLE_JIT", "").strip().lower() not in _FALSY


try:
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not jit_disabled()


def njit(func):
    """Compile ``func`` in nopython/nogil mode when numba is enabled."""
    if not USE_NUMBA:
        return func
    return numba.njit(nogil=True, cache=True)(func)
