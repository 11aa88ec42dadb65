"""Kernel backend selection.

The compiled extension is preferred; setting ``SADDLEPOINT_PURE_PYTHON=1``
or a missing build falls back to the pure-Python twin. Both expose the
same functions with the same signatures.
"""

import os

if os.environ.get("SADDLEPOINT_PURE_PYTHON"):
    from . import _pykernels as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        from . import _pykernels as _impl
        BACKEND = "python"

ridge_eval = _impl.ridge_eval
ridge_gauge = _impl.ridge_gauge
ridge_conjugate = _impl.ridge_conjugate
ridge_conjugate_gauge = _impl.ridge_conjugate_gauge
ridge_support = _impl.ridge_support
grid_entropy_min = _impl.grid_entropy_min

# which quantity a ridge function sums
GAMMA, LAMBDA, LAMBDA_MAX = 0, 1, 2
