"""Backend selection for the inner loops.

The compiled extension is used when it was built; otherwise the pure-Python
fallback is loaded. Set ``DIVBENCH_PURE_PYTHON=1`` to force the fallback.
"""
import os

from divbench import _pykernels

if os.environ.get("DIVBENCH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from divbench import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

simulate_open_loop = _impl.simulate_open_loop
resample_arclength = _impl.resample_arclength
knights_walk = _impl.knights_walk
KNIGHT_MOVES = _pykernels.KNIGHT_MOVES

__all__ = ["BACKEND", "KNIGHT_MOVES", "knights_walk", "resample_arclength", "simulate_open_loop"]
