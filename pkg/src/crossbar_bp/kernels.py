"""Backend selection for the crossbar update loops.

The compiled extension is used when it imports; otherwise the numpy version.
Set ``CROSSBAR_BP_BACKEND=python`` (or ``cython``) to force one.
"""

import importlib
import os

from . import _pykernels


def load_backend(name: str = "auto"):
    """Return ``(module, name)`` for the requested backend."""
    if name == "python":
        return _pykernels, "python"
    try:
        mod = importlib.import_module("crossbar_bp._kernels")
    except ImportError:
        if name == "cython":
            raise
        return _pykernels, "python"
    return mod, "cython"


_impl, BACKEND = load_backend(os.environ.get("CROSSBAR_BP_BACKEND", "auto"))

apply_single = _impl.apply_single
apply_outer = _impl.apply_outer
apply_votes = _impl.apply_votes
