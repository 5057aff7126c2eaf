"""Kernel backend selection.

The compiled core (``cleit.kernels._core``, built from Cython) is used when
importable; otherwise the NumPy reference implementations take over. Set
``CLEIT_BACKEND=python`` to force the fallback, e.g. for benchmarking or
debugging. Both backends implement the same functions and agree to
floating-point roundoff, so the choice never affects results beyond the
last ulp.
"""

import os

from . import reference
from .reference import SELU_ALPHA, SELU_SCALE

_impl = reference
_BACKEND = "python"

if os.environ.get("CLEIT_BACKEND", "").lower() != "python":
    try:
        from . import _core

        _impl = _core
        _BACKEND = "compiled"
    except ImportError:
        pass

selu_fwd = _impl.selu_fwd
selu_bwd = _impl.selu_bwd
sigmoid_fwd = _impl.sigmoid_fwd
sigmoid_bwd = _impl.sigmoid_bwd
adamax_update = _impl.adamax_update


def backend_name() -> str:
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return _BACKEND


__all__ = [
    "SELU_ALPHA",
    "SELU_SCALE",
    "selu_fwd",
    "selu_bwd",
    "sigmoid_fwd",
    "sigmoid_bwd",
    "adamax_update",
    "backend_name",
]
