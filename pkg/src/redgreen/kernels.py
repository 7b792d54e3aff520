"""Kernel backend selection.

The compiled extension ``redgreen._kernels`` is used when it imports; the
numpy implementation in ``redgreen._kernels_py`` is the fallback.  Setting
``REDGREEN_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if not os.environ.get("REDGREEN_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _kernels_py

p1_geometry = _impl.p1_geometry
assemble_coo = _impl.assemble_coo
pair_scan = _impl.pair_scan


def backends():
    """Available implementations keyed by name, for tests and benchmarks."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
