"""Slow, loop-based float64 references. Deliberately share no code with the
library: no vectorized attention, no interpolation matrices."""
from __future__ import annotations

import math

import numpy as np


def naive_matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += float(a[i, t]) * float(b[t, j])
            out[i, j] = acc
    return out


def naive_softmax(row):
    m = max(row)
    e = [math.exp(float(v) - m) for v in row]
    s = sum(e)
    return [v / s for v in e]


def naive_attention(q, k, v, heads):
    """Single-sequence multi-head attention, one query row at a time."""
    lq, d = q.shape
    lk, dv = v.shape
    dh, dvh = d // heads, dv // heads
    out = np.zeros((lq, dv))
    for h in range(heads):
        for i in range(lq):
            scores = []
            for j in range(lk):
                s = 0.0
                for c in range(dh):
                    s += float(q[i, h * dh + c]) * float(k[j, h * dh + c])
                scores.append(s / math.sqrt(dh))
            p = naive_softmax(scores)
            for c in range(dvh):
                out[i, h * dvh + c] = sum(p[j] * float(v[j, h * dvh + c]) for j in range(lk))
    return out


def bilinear_pixel(img, out_w, out_h, i, j):
    """Closed-form align_corners=False bilinear sample of a 2-D grid."""
    w, h = img.shape

    def coord(dst, n_in, n_out):
        src = (dst + 0.5) * n_in / n_out - 0.5
        src = max(src, 0.0)
        lo = min(int(math.floor(src)), n_in - 1)
        hi = min(lo + 1, n_in - 1)
        return lo, hi, src - lo

    x0, x1, a = coord(i, w, out_w)
    y0, y1, b = coord(j, h, out_h)
    return ((1 - a) * (1 - b) * img[x0, y0] + (1 - a) * b * img[x0, y1]
            + a * (1 - b) * img[x1, y0] + a * b * img[x1, y1])


def bilinear_resize(img, out_w, out_h):
    return np.array([[bilinear_pixel(img, out_w, out_h, i, j) for j in range(out_h)] for i in range(out_w)])


def resize_clip(x, target):
    """Resize the last two axes of any array with :func:`bilinear_resize`."""
    lead = x.shape[:-2]
    flat = x.reshape(-1, *x.shape[-2:])
    out = np.stack([bilinear_resize(f, *target) for f in flat])
    return out.reshape(*lead, *target)


def linear(x, w):
    """Token-wise ``x @ w`` by loops, for ``x`` of shape [L, d_in]."""
    return naive_matmul(x, w)
