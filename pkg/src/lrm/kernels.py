"""Kernel backend selection.

The compiled extension ``lrm._kernels`` is used when it imports; otherwise the
numpy fallback in ``lrm._kernels_py`` is used. Set ``LRM_PURE_PYTHON=1`` to force
the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("LRM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
project_l1_columns = _impl.project_l1_columns
nesterov_l = _impl.nesterov_l
quad_objective = _kernels_py.quad_objective

__all__ = ["BACKEND", "project_l1_columns", "nesterov_l", "quad_objective"]
