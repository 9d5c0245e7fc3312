"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set ``CDNOMA_PURE_PYTHON=1`` to force the fallback (used by the test suite
to exercise both paths and by ``benchmarks/bench_kernels.py``).
"""

import os

from . import _kernels_py as python

try:
    if os.environ.get("CDNOMA_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python kernels requested")
    from . import _kernels as compiled
except ImportError:
    compiled = None

backend = compiled if compiled is not None else python
BACKEND = "compiled" if compiled is not None else "python"

onering_lags_2d = backend.onering_lags_2d
onering_lags_3d = backend.onering_lags_3d
linear_assignment = backend.linear_assignment

__all__ = ["onering_lags_2d", "onering_lags_3d", "linear_assignment",
           "BACKEND", "compiled", "python"]
