"""Kernel backend selection.

The compiled extension ``qclab._kernels`` is used when it imports; otherwise
(or when ``QCLAB_PURE_PYTHON=1``) the numpy implementations in
``qclab._kernels_py`` are used.  ``BACKEND`` names the active choice.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("QCLAB_PURE_PYTHON", "") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

farthest_point_traversal = _impl.farthest_point_traversal
cone_first_hit = _impl.cone_first_hit

__all__ = ["BACKEND", "farthest_point_traversal", "cone_first_hit"]
