"""Hot kernels with a compiled backend and a numpy fallback.

The backend is chosen once at import. ``VIDINPAINT_KERNELS`` forces it:
``cython`` (every kernel compiled; fail if the extension is missing),
``numpy``, or ``auto`` (default). Under ``auto`` the compiled resize is used
when importable and attention stays on numpy, whose BLAS-backed matmul beats
the scalar loops; see ``benchmarks/bench_kernels.py``.
"""
from __future__ import annotations

import logging
import os

from . import _numpy_kernels

logger = logging.getLogger(__name__)

_choice = os.environ.get("VIDINPAINT_KERNELS", "auto").lower()
if _choice not in ("auto", "cython", "numpy"):
    raise ImportError(f"VIDINPAINT_KERNELS must be auto, cython or numpy, got {_choice!r}")

_compiled = None
if _choice != "numpy":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        if _choice == "cython":
            raise
        logger.debug("compiled kernels unavailable, using numpy fallback")

_resize = _compiled if _compiled is not None else _numpy_kernels
_attention = _compiled if _choice == "cython" else _numpy_kernels

attention_forward = _attention.attention_forward
attention_backward = _attention.attention_backward
resize_forward = _resize.resize_forward
resize_backward = _resize.resize_backward

# kernel -> backend name actually in use
SELECTED = {
    "attention": "cython" if _attention is _compiled else "numpy",
    "resize": "cython" if _resize is _compiled else "numpy",
}


def available_backends():
    """Map of backend name to module, for benchmarks and cross-checks."""
    found = {"numpy": _numpy_kernels}
    if _compiled is not None:
        found["cython"] = _compiled
    return found
