"""Kernel backend selection.

The compiled extension is preferred; set ``MEMEXPLORER_PURE_PYTHON=1`` to
force the numpy fallback (the test-suite runs both).
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("MEMEXPLORER_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        _impl = _compiled
        BACKEND = "cython"

serve_boundary = _impl.serve_boundary
ehvi_2d = _impl.ehvi_2d
hypervolume_2d = _impl.hypervolume_2d


def backends():
    """Map backend name to module for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels as compiled
    except ImportError:
        pass
    else:
        found["cython"] = compiled
    return found
