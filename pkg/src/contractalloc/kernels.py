"""Kernel backend selection.

Prefers the compiled Cython kernels and silently falls back to the NumPy
implementation when the extension was not built. CONTRACTALLOC_KERNELS can
force a backend ("cython" or "python"); forcing cython without the built
extension is an error rather than a quiet downgrade.
"""

from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("CONTRACTALLOC_KERNELS", "auto").strip().lower()

if _requested in ("auto", "", "cython"):
    try:
        from . import _kernels_cy as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "CONTRACTALLOC_KERNELS=cython but contractalloc._kernels_cy is "
                "not built; run the build or unset the variable"
            )
        _impl = _kernels_py
        BACKEND = "python"
elif _requested in ("python", "numpy"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    raise ValueError(f"unknown CONTRACTALLOC_KERNELS value {_requested!r}")

COINCIDENT_DIST = _kernels_py.COINCIDENT_DIST

nearest_assignment = _impl.nearest_assignment
assigned_energy = _impl.assigned_energy
attraction_controls = _impl.attraction_controls
barrier_controls = _impl.barrier_controls
