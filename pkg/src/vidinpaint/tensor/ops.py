"""Differentiable primitives.

Each primitive is a ``(forward, backward)`` pair over raw arrays passed to
:func:`core.apply`. ``forward`` returns ``(out, saved)``; ``backward``
receives ``(grad_out, saved, *input_arrays, **params)`` and returns one
gradient (or ``None``) per input.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .. import kernels
from ..errors import InvalidArgumentError, InvalidShapeError
from .core import Tensor, apply

RESIZE_MODES = ("bilinear", "nearest")


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise InvalidShapeError(f"shapes {a.shape} and {b.shape} do not broadcast") from None


# -- elementwise ------------------------------------------------------------

def _add_fwd(a, b):
    return a + b, None


def _add_bwd(g, _, a, b):
    return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    return apply("add", _add_fwd, _add_bwd, a, b)


def _sub_fwd(a, b):
    return a - b, None


def _sub_bwd(g, _, a, b):
    return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    return apply("sub", _sub_fwd, _sub_bwd, a, b)


def _mul_fwd(a, b):
    return a * b, None


def _mul_bwd(g, _, a, b):
    return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    return apply("mul", _mul_fwd, _mul_bwd, a, b)


def _scale_fwd(x, factor):
    return x * x.dtype.type(factor), None


def _scale_bwd(g, _, x, factor):
    return (g * x.dtype.type(factor),)


def scale(x: Tensor, factor: float) -> Tensor:
    return apply("scale", _scale_fwd, _scale_bwd, x, factor=float(factor))


def _square_fwd(x):
    return x * x, None


def _square_bwd(g, _, x):
    return (2 * g * x,)


def square(x: Tensor) -> Tensor:
    return apply("square", _square_fwd, _square_bwd, x)


def _sum_fwd(x):
    return np.asarray(x.sum(dtype=x.dtype)), None


def _sum_bwd(g, _, x):
    return (np.broadcast_to(g, x.shape).copy(),)


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    return apply("sum", _sum_fwd, _sum_bwd, x)


def _mean_fwd(x):
    return np.asarray(x.mean(dtype=x.dtype)), None


def _mean_bwd(g, _, x):
    return (np.full(x.shape, g / x.size, dtype=x.dtype),)


def mean(x: Tensor) -> Tensor:
    return apply("mean", _mean_fwd, _mean_bwd, x)


def _expand_fwd(x, shape):
    return np.broadcast_to(x, shape).copy(), None


def _expand_bwd(g, _, x, shape):
    return (_unbroadcast(g, x.shape),)


def expand(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(n) for n in shape)
    try:
        np.broadcast_shapes(x.shape, shape)
    except ValueError:
        raise InvalidShapeError(f"cannot expand {x.shape} to {shape}") from None
    return apply("expand", _expand_fwd, _expand_bwd, x, shape=shape)


# -- views ------------------------------------------------------------------

def _reshape_fwd(x, shape):
    return x.reshape(shape), None


def _reshape_bwd(g, _, x, shape):
    return (g.reshape(x.shape),)


def reshape_view(x: Tensor, new_shape: Sequence[int]) -> Tensor:
    """Relabel the row-major data with ``new_shape`` (one ``-1`` allowed)."""
    new_shape = tuple(int(n) for n in new_shape)
    if new_shape.count(-1) == 1:
        known = math.prod(n for n in new_shape if n != -1)
        if known == 0 or x.data.size % known:
            raise InvalidShapeError(f"cannot reshape {x.shape} to {new_shape}")
        new_shape = tuple(x.data.size // known if n == -1 else n for n in new_shape)
    if any(n < 1 for n in new_shape) or math.prod(new_shape) != x.data.size:
        raise InvalidShapeError(f"cannot reshape {x.shape} to {new_shape}")
    return apply("reshape", _reshape_fwd, _reshape_bwd, x, shape=new_shape)


def _permute_fwd(x, order):
    return np.ascontiguousarray(x.transpose(order)), None


def _permute_bwd(g, _, x, order):
    return (np.ascontiguousarray(g.transpose(np.argsort(order))),)


def permute(x: Tensor, axis_order: Sequence[int]) -> Tensor:
    order = tuple(int(a) for a in axis_order)
    if sorted(order) != list(range(x.ndim)):
        raise InvalidArgumentError(f"{order} is not a permutation of 0..{x.ndim - 1}")
    return apply("permute", _permute_fwd, _permute_bwd, x, order=order)


def _concat_fwd(*xs, axis):
    return np.concatenate(xs, axis=axis), None


def _concat_bwd(g, _, *xs, axis):
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return [np.ascontiguousarray(p) for p in np.split(g, bounds, axis=axis)]


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    ref = tensors[0]
    axis = axis % ref.ndim
    for t in tensors[1:]:
        if t.ndim != ref.ndim or any(a != b for i, (a, b) in enumerate(zip(t.shape, ref.shape)) if i != axis):
            raise InvalidShapeError(f"cannot concatenate {t.shape} with {ref.shape} on axis {axis}")
    return apply("concat", _concat_fwd, _concat_bwd, *tensors, axis=axis)


def _slice_fwd(x, axis, start, stop):
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, stop)
    return np.ascontiguousarray(x[tuple(idx)]), None


def _slice_bwd(g, _, x, axis, start, stop):
    out = np.zeros(x.shape, dtype=g.dtype)
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, stop)
    out[tuple(idx)] = g
    return (out,)


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    axis = axis % x.ndim
    if not 0 <= start < stop <= x.shape[axis]:
        raise InvalidArgumentError(f"bad slice [{start}:{stop}] of axis size {x.shape[axis]}")
    return apply("slice", _slice_fwd, _slice_bwd, x, axis=axis, start=start, stop=stop)


# -- linear algebra -----------------------------------------------------------

def _matmul_fwd(a, b):
    return np.matmul(a, b), None


def _matmul_bwd(g, _, a, b):
    ga = np.matmul(g, np.swapaxes(b, -1, -2))
    gb = np.matmul(np.swapaxes(a, -1, -2), g)
    return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched ``[..., m, k] @ [..., k, n]`` with broadcast leading dims."""
    if a.ndim < 2 or b.ndim < 2:
        raise InvalidShapeError("matmul needs rank >= 2 operands")
    if a.shape[-1] != b.shape[-2]:
        raise InvalidShapeError(f"inner dims differ: {a.shape} @ {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise InvalidShapeError(f"batch dims do not broadcast: {a.shape} @ {b.shape}") from None
    return apply("matmul", _matmul_fwd, _matmul_bwd, a, b)


def _softmax_fwd(x, axis):
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    return out, out


def _softmax_bwd(g, y, x, axis):
    return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if not -x.ndim <= axis < x.ndim:
        raise InvalidArgumentError(f"axis {axis} out of range for rank {x.ndim}")
    return apply("softmax", _softmax_fwd, _softmax_bwd, x, axis=axis % x.ndim)


def _layer_norm_fwd(x, gamma, beta, axis, eps):
    mu = x.mean(axis=axis, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + x.dtype.type(eps))
    xhat = xc * inv
    return xhat * gamma + beta, (xhat, inv)


def _layer_norm_bwd(g, saved, x, gamma, beta, axis, eps):
    xhat, inv = saved
    gx_hat = g * gamma
    gx = inv * (gx_hat - gx_hat.mean(axis=axis, keepdims=True)
                - xhat * (gx_hat * xhat).mean(axis=axis, keepdims=True))
    return gx, _unbroadcast(g * xhat, gamma.shape), _unbroadcast(g, beta.shape)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, axis: int = -1, eps: float = 1e-5) -> Tensor:
    """Normalize over one axis, then apply the per-feature scale and shift.

    ``gamma`` and ``beta`` must broadcast against ``x``.
    """
    axis = axis % x.ndim
    _check_broadcast(x, gamma)
    _check_broadcast(x, beta)
    return apply("layer_norm", _layer_norm_fwd, _layer_norm_bwd, x, gamma, beta, axis=axis, eps=eps)


# -- attention -----------------------------------------------------------------

def _split_heads(x, heads):
    n, d = x.shape[-2:]
    return x.reshape(-1, n, heads, d // heads).transpose(0, 2, 1, 3).reshape(-1, n, d // heads)


def _merge_heads(x, heads, lead):
    _, n, dh = x.shape
    return x.reshape(-1, heads, n, dh).transpose(0, 2, 1, 3).reshape(*lead, n, heads * dh)


def _attention_fwd(q, k, v, heads):
    lead = q.shape[:-2]
    scale = 1.0 / math.sqrt(q.shape[-1] // heads)
    qh = np.ascontiguousarray(_split_heads(q, heads))
    kh = np.ascontiguousarray(_split_heads(k, heads))
    vh = np.ascontiguousarray(_split_heads(v, heads))
    out, probs = kernels.attention_forward(qh, kh, vh, scale)
    return _merge_heads(out, heads, lead), (qh, kh, vh, probs, scale)


def _attention_bwd(g, saved, q, k, v, heads):
    qh, kh, vh, probs, scale = saved
    gh = np.ascontiguousarray(_split_heads(g, heads))
    gq, gk, gv = kernels.attention_backward(qh, kh, vh, probs, gh, scale)
    return (_merge_heads(gq, heads, q.shape[:-2]), _merge_heads(gk, heads, k.shape[:-2]),
            _merge_heads(gv, heads, v.shape[:-2]))


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, heads: int = 1) -> Tensor:
    """Multi-head ``softmax(q kᵀ / sqrt(d/heads)) v`` with heads concatenated.

    q: [..., Lq, d], k: [..., Lk, d], v: [..., Lk, dv]; leading dims must be
    identical (use :func:`expand` first). Both d and dv are split into
    ``heads`` equal slices.
    """
    if heads < 1 or q.shape[-1] % heads or v.shape[-1] % heads:
        raise InvalidArgumentError(f"head count {heads} does not divide dims {q.shape[-1]}, {v.shape[-1]}")
    if q.ndim < 2 or k.ndim != q.ndim or v.ndim != q.ndim:
        raise InvalidShapeError(f"rank mismatch: q {q.shape}, k {k.shape}, v {v.shape}")
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise InvalidShapeError(f"inconsistent attention shapes q {q.shape}, k {k.shape}, v {v.shape}")
    if q.shape[:-2] != k.shape[:-2] or q.shape[:-2] != v.shape[:-2]:
        raise InvalidShapeError(f"leading dims differ: q {q.shape}, k {k.shape}, v {v.shape}")
    if not q.dtype == k.dtype == v.dtype:
        raise InvalidArgumentError("q, k, v must share a dtype")
    return apply("attention", _attention_fwd, _attention_bwd, q, k, v, heads=int(heads))


# -- resampling -------------------------------------------------------------------

def _resize_fwd(x, size, mode):
    w, h = x.shape[-2:]
    if (w, h) == size:
        return x.copy(), None
    flat = np.ascontiguousarray(x.reshape(-1, w, h))
    out = kernels.resize_forward(flat, size[0], size[1], mode)
    return out.reshape(*x.shape[:-2], *size), None


def _resize_bwd(g, _, x, size, mode):
    w, h = x.shape[-2:]
    if (w, h) == size:
        return (g.copy(),)
    flat = np.ascontiguousarray(g.reshape(-1, *size))
    return (kernels.resize_backward(flat, w, h, mode).reshape(x.shape),)


def spatial_resize(x: Tensor, target: Sequence[int], mode: str = "bilinear") -> Tensor:
    """Resample the last two axes to ``target`` (align_corners=False).

    Works on any leading layout, e.g. ``[f, c, w, h]``. The backward pass
    is the transpose of the interpolation map.
    """
    if mode not in RESIZE_MODES:
        raise InvalidArgumentError(f"mode must be one of {RESIZE_MODES}, got {mode!r}")
    size = tuple(int(n) for n in target)
    if len(size) != 2 or min(size) < 1:
        raise InvalidArgumentError(f"target must be two sizes >= 1, got {target}")
    if x.ndim < 2:
        raise InvalidShapeError("spatial_resize needs rank >= 2")
    return apply("resize", _resize_fwd, _resize_bwd, x, size=size, mode=mode)


# -- composites ---------------------------------------------------------------------

def mse(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise InvalidShapeError(f"mse shape mismatch {a.shape} vs {b.shape}")
    return mean(square(sub(a, b)))
