"""Analytic and Monte Carlo evaluation of RIS-aided NOMA heterogeneous networks.

The analytic side (``association``, ``coverage``) evaluates association and
coverage probabilities by quadrature; ``montecarlo`` simulates the same
stochastic-geometry model directly and serves as its independent check.
Set ``RISEVAL_NO_NUMBA=1`` to run the pure-numpy kernels.
"""

from ._accel import backend_name
from .config import ConfigError, SystemParams, derive, load_params

__all__ = ["ConfigError", "SystemParams", "backend_name", "derive", "load_params"]
__version__ = "0.1.0"
