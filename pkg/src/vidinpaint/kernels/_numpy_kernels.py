"""Pure numpy implementations of the hot kernels.

Every function here has a twin of the same name and signature in
``_ckernels.pyx``. Arrays are C-contiguous float32 or float64; attention
inputs are 3-D ``[batch, length, dim]`` and resize inputs are 3-D
``[batch, width, height]``.
"""
from __future__ import annotations

import numpy as np


def attention_forward(q, k, v, scale):
    scores = np.matmul(q, k.transpose(0, 2, 1))
    scores *= scale
    scores -= scores.max(axis=-1, keepdims=True)
    probs = np.exp(scores)
    probs /= probs.sum(axis=-1, keepdims=True)
    return np.matmul(probs, v), probs


def attention_backward(q, k, v, probs, grad_out, scale):
    grad_v = np.matmul(probs.transpose(0, 2, 1), grad_out)
    grad_p = np.matmul(grad_out, v.transpose(0, 2, 1))
    grad_s = probs * (grad_p - (grad_p * probs).sum(axis=-1, keepdims=True))
    grad_s *= scale
    grad_q = np.matmul(grad_s, k)
    grad_k = np.matmul(grad_s.transpose(0, 2, 1), q)
    return grad_q, grad_k, grad_v


def interp_taps(n_in, n_out, mode):
    """Source indices and weights for 1-D resampling, align_corners=False.

    Returns ``(lo, hi, w_hi)``: output ``i`` reads
    ``(1 - w_hi[i]) * src[lo[i]] + w_hi[i] * src[hi[i]]``.
    """
    ratio = n_in / n_out
    dst = np.arange(n_out, dtype=np.float64)
    if mode == "nearest":
        lo = np.minimum(np.floor(dst * ratio).astype(np.intp), n_in - 1)
        return lo, lo, np.zeros(n_out)
    src = np.clip((dst + 0.5) * ratio - 0.5, 0.0, None)
    lo = np.minimum(np.floor(src).astype(np.intp), n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def _interp_matrix(n_in, n_out, mode, dtype):
    lo, hi, w = interp_taps(n_in, n_out, mode)
    m = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    np.add.at(m, (rows, lo), 1.0 - w)
    np.add.at(m, (rows, hi), w)
    return m.astype(dtype)


def resize_forward(x, out_w, out_h, mode):
    mw = _interp_matrix(x.shape[1], out_w, mode, x.dtype)
    mh = _interp_matrix(x.shape[2], out_h, mode, x.dtype)
    return np.matmul(np.matmul(mw, x), mh.T)


def resize_backward(grad, in_w, in_h, mode):
    mw = _interp_matrix(in_w, grad.shape[1], mode, grad.dtype)
    mh = _interp_matrix(in_h, grad.shape[2], mode, grad.dtype)
    return np.matmul(np.matmul(mw.T, grad), mh)
