"""Hot-loop kernels with a numba fast path and a pure-numpy fallback.

Import the functions from here; the backend is picked by ``numina._backend``
(env var ``NUMINA_BACKEND``).  Both backends implement identical semantics;
see ``benchmarks/bench_backends.py`` for the speed comparison.
"""

from .._backend import ACTIVE_BACKEND

if ACTIVE_BACKEND == "numba":
    from ._numba import (
        best_placement,
        dbscan_labels,
        label_components,
        link_modes,
        mean_shift_modes,
    )
else:
    from ._numpy import (
        best_placement,
        dbscan_labels,
        label_components,
        link_modes,
        mean_shift_modes,
    )

__all__ = [
    "best_placement",
    "dbscan_labels",
    "label_components",
    "link_modes",
    "mean_shift_modes",
]
