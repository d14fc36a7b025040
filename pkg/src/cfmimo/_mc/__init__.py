"""Monte Carlo trial kernels: compiled extension with a pure-numpy fallback.

The compiled kernel (`_kernels_cy`, Cython + LAPACK) and the numpy kernel
(`kernels_py`) implement the same per-trial computation; which one runs is
decided once at first use. Set CFMIMO_BACKEND=python|compiled to force a
choice (default: compiled when importable, numpy otherwise). Both consume the
same pre-drawn random arrays, so a given master seed is reproducible within a
backend; across backends results agree to floating-point reassociation.
"""

import os

from ..errors import ConfigError

_cached = None


def kernel_module(prefer=None):
    """Return the selected kernel module; caches the auto choice."""
    global _cached
    choice = prefer or os.environ.get("CFMIMO_BACKEND", "auto")
    if choice == "auto" and _cached is not None:
        return _cached
    if choice == "python":
        from . import kernels_py as mod
    elif choice == "compiled":
        from . import _kernels_cy as mod
    elif choice == "auto":
        try:
            from . import _kernels_cy as mod
        except ImportError:
            from . import kernels_py as mod
        _cached = mod
    else:
        raise ConfigError(f"unknown backend {choice!r} (use 'python' or 'compiled')")
    return mod


def backend_name():
    return kernel_module().BACKEND
