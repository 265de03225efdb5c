"""Backend selection for the hot loops.

The Cython extension is used when it was built; otherwise (or when
``MBHARVEST_PURE_PYTHON`` is set to a non-empty value) the pure-Python
versions are used.  ``BACKEND`` names the active one.
"""

import os

from . import _kernels_py

if os.environ.get("MBHARVEST_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

smo_solve = _impl.smo_solve
grid_min_samples = _impl.grid_min_samples
