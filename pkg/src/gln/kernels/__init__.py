"""Layer kernels: the compiled extension when available, numpy otherwise.

Set ``GLN_PURE_PYTHON=1`` to force the numpy backend.
"""

import os

from . import _pykernels as python

compiled = None
if os.environ.get("GLN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

active = compiled if compiled is not None else python
BACKEND = active.BACKEND
forward_layer = active.forward_layer
update_layer = active.update_layer


def get_backend(name=None):
    """Return the kernel module named ``'cython'`` or ``'numpy'`` (default: active)."""
    if name is None:
        return active
    if name == "numpy":
        return python
    if name == "cython":
        if compiled is None:
            raise ImportError("the compiled kernel extension is not built")
        return compiled
    raise ValueError(f"unknown kernel backend {name!r}")
