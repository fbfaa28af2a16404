"""Kernel backend selection.

The compiled extension ``fluctmipt._core`` is used when importable; otherwise
the numpy implementation in ``fluctmipt._pykernels`` is used. Setting
``FLUCTMIPT_BACKEND=python`` forces the fallback.
"""

import os

from . import _pykernels

if os.environ.get("FLUCTMIPT_BACKEND", "").lower() == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

apply_gate = _impl.apply_gate
prob_up = _impl.prob_up
project = _impl.project
norm_sq = _impl.norm_sq
collapse_cost_grid = _impl.collapse_cost_grid

__all__ = ["BACKEND", "apply_gate", "prob_up", "project", "norm_sq", "collapse_cost_grid"]
