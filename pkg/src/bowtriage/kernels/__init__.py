"""Hot numeric kernels with a selectable backend.

The numba backend (@njit, cached, nogil) is used when importable; set
``BOWTRIAGE_BACKEND=numpy`` to force the pure-numpy fallback or
``BOWTRIAGE_BACKEND=numba`` to fail loudly when numba is unavailable.
Both backends implement identical algorithms with identical tie breaking;
``benchmarks/backend_bench.py`` compares their throughput.
"""

from __future__ import annotations

import os

_requested = os.environ.get("BOWTRIAGE_BACKEND", "auto").strip().lower() or "auto"
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"BOWTRIAGE_BACKEND must be 'auto', 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    from . import _numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import _numpy as _impl

        BACKEND = "numpy"

best_split_gini = _impl.best_split_gini
best_split_mse = _impl.best_split_mse
eval_fixed_splits_gini = _impl.eval_fixed_splits_gini
tree_apply = _impl.tree_apply
csr_dots = _impl.csr_dots
svm_epochs = _impl.svm_epochs


def active_backend() -> str:
    """Name of the backend selected at import time."""
    return BACKEND
