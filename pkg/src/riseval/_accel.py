"""Numba dispatch switch.

Hot kernels are written twice: a loop form compiled with ``numba.njit`` and
a vectorised numpy form.  Setting ``RISEVAL_NO_NUMBA=1`` (or running without
numba installed) selects the numpy path everywhere.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("RISEVAL_NO_NUMBA", "0") in ("", "0")


def njit(fn):
    """Compile ``fn`` with numba when it is available, else return it as is."""
    if numba is None:
        return fn
    return numba.njit(cache=True, fastmath=False)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
