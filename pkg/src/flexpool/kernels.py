"""Hot-kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy fallback in ``_kernels_py`` is used. Set ``FLEXPOOL_PURE=1`` to force
the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("FLEXPOOL_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _kernels_py

aggregate_eval = _impl.aggregate_eval
distribute_fill = _impl.distribute_fill
pe_project_newton = _impl.pe_project_newton
pe_dykstra = _impl.pe_dykstra


def available_backends():
    """Map of backend name to kernel module for every importable backend."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
