"""Backend selection for the numerical kernels.

The compiled module is used when it was built; otherwise the pure-Python
implementation is imported. Set ``PLKDESCENT_PURE_PYTHON=1`` to force the
fallback (used by the benchmark and by the backend-agreement tests).
"""

import os

from . import _kernels_py

if os.environ.get("PLKDESCENT_PURE_PYTHON"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

if _compiled is not None:
    solve_pow_residual = _compiled.solve_pow_residual
    max_pair_slope = _compiled.max_pair_slope
    BACKEND = "cython"
else:
    solve_pow_residual = _kernels_py.solve_pow_residual
    max_pair_slope = _kernels_py.max_pair_slope
    BACKEND = "python"

__all__ = ["solve_pow_residual", "max_pair_slope", "BACKEND"]
