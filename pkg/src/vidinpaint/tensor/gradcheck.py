"""Central finite differences, the oracle for every tape gradient."""
from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import InvalidArgumentError
from .core import Tensor


def finite_diff_grad(fn: Callable, x, h: float = 1e-3):
    """Estimate d fn / dx coordinate-wise by ``(fn(x+h e_i) - fn(x-h e_i)) / 2h``.

    ``fn`` must be scalar-valued and deterministic. It receives the same
    kind of object as ``x`` (Tensor or ndarray), and the estimate is
    returned in that kind too.
    """
    if h <= 0:
        raise InvalidArgumentError("step h must be positive")
    is_tensor = isinstance(x, Tensor)
    base = np.array(x.data if is_tensor else x, dtype=np.float64 if not is_tensor else x.dtype)
    wrap = (lambda a: Tensor(a, dtype=base.dtype)) if is_tensor else (lambda a: a)
    grad = np.zeros(base.shape, dtype=np.float64)
    flat = base.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = float(_scalar(fn(wrap(base.copy()))))
        flat[i] = orig - h
        down = float(_scalar(fn(wrap(base.copy()))))
        flat[i] = orig
        grad.reshape(-1)[i] = (up - down) / (2 * h)
    grad = grad.astype(base.dtype)
    return Tensor(grad) if is_tensor else grad


def _scalar(v):
    if isinstance(v, Tensor):
        return v.item()
    return v


def relative_error(analytic, numeric) -> float:
    """``||a - n|| / max(||a||, ||n||)``; zero when both vanish."""
    a = np.asarray(getattr(analytic, "data", analytic), dtype=np.float64)
    n = np.asarray(getattr(numeric, "data", numeric), dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(n))
    return 0.0 if denom == 0 else float(np.linalg.norm(a - n) / denom)
