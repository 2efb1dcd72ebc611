"""Kernel backend selection.

The hot inner loops (mean shift, mode linking, DBSCAN, connected components,
placement search) exist twice: a numba ``@njit`` version and a pure-numpy
fallback.  The active backend is chosen once at import time:

* ``NUMINA_BACKEND=numpy``  force the pure-numpy kernels
* ``NUMINA_BACKEND=numba``  force numba (raises if numba is unavailable)
* unset                      numba when importable, numpy otherwise

``benchmarks/bench_backends.py`` compares the two.
"""

import os

_VALID = ("numba", "numpy")


def _resolve() -> str:
    requested = os.environ.get("NUMINA_BACKEND", "").strip().lower()
    if requested and requested not in _VALID:
        raise ValueError(f"NUMINA_BACKEND must be one of {_VALID}, got {requested!r}")
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if requested == "numba":
            raise
        return "numpy"
    return "numba"


ACTIVE_BACKEND = _resolve()


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return ACTIVE_BACKEND
