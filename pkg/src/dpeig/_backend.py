"""Backend selection for the compiled kernels.

Set ``DPEIG_NUMBA=0`` in the environment to force the pure-numpy path.
The choice is made once, at import time.
"""
import os

_FLAG = os.environ.get("DPEIG_NUMBA", "1").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is the optional "fast" extra
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
