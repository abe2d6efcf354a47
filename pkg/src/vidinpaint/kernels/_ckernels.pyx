# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of ``_numpy_kernels``: fused attention and 2-tap resize."""
import numpy as np
cimport cython
from libc.math cimport exp, floor

ctypedef fused real:
    float
    double


def attention_forward(const real[:, :, ::1] q, const real[:, :, ::1] k, const real[:, :, ::1] v, double scale):
    cdef Py_ssize_t B = q.shape[0], Lq = q.shape[1], d = q.shape[2]
    cdef Py_ssize_t Lk = k.shape[1], dv = v.shape[2]
    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros((B, Lq, dv), dtype=dtype)
    probs_arr = np.empty((B, Lq, Lk), dtype=dtype)
    cdef real[:, :, ::1] out = out_arr
    cdef real[:, :, ::1] probs = probs_arr
    cdef Py_ssize_t b, i, j, c
    cdef double acc, mx, total, p
    with nogil:
        for b in range(B):
            for i in range(Lq):
                mx = -1e308
                for j in range(Lk):
                    acc = 0.0
                    for c in range(d):
                        acc = acc + q[b, i, c] * k[b, j, c]
                    acc = acc * scale
                    probs[b, i, j] = <real>acc
                    if probs[b, i, j] > mx:
                        mx = probs[b, i, j]
                total = 0.0
                for j in range(Lk):
                    probs[b, i, j] = <real>exp(probs[b, i, j] - mx)
                    total = total + probs[b, i, j]
                for j in range(Lk):
                    probs[b, i, j] = <real>(probs[b, i, j] / total)
                for j in range(Lk):
                    p = probs[b, i, j]
                    for c in range(dv):
                        out[b, i, c] = <real>(out[b, i, c] + p * v[b, j, c])
    return out_arr, probs_arr


def attention_backward(const real[:, :, ::1] q, const real[:, :, ::1] k, const real[:, :, ::1] v,
                       const real[:, :, ::1] probs, const real[:, :, ::1] grad_out, double scale):
    cdef Py_ssize_t B = q.shape[0], Lq = q.shape[1], d = q.shape[2]
    cdef Py_ssize_t Lk = k.shape[1], dv = v.shape[2]
    dtype = np.float32 if real is float else np.float64
    gq_arr = np.zeros((B, Lq, d), dtype=dtype)
    gk_arr = np.zeros((B, Lk, d), dtype=dtype)
    gv_arr = np.zeros((B, Lk, dv), dtype=dtype)
    gp_arr = np.empty(Lk, dtype=np.float64)
    cdef real[:, :, ::1] gq = gq_arr
    cdef real[:, :, ::1] gk = gk_arr
    cdef real[:, :, ::1] gv = gv_arr
    cdef double[::1] gp = gp_arr
    cdef Py_ssize_t b, i, j, c
    cdef double acc, dot, gs, p
    with nogil:
        for b in range(B):
            for i in range(Lq):
                dot = 0.0
                for j in range(Lk):
                    p = probs[b, i, j]
                    acc = 0.0
                    for c in range(dv):
                        acc = acc + grad_out[b, i, c] * v[b, j, c]
                        gv[b, j, c] = <real>(gv[b, j, c] + p * grad_out[b, i, c])
                    gp[j] = acc
                    dot = dot + acc * p
                for j in range(Lk):
                    gs = probs[b, i, j] * (gp[j] - dot) * scale
                    for c in range(d):
                        gq[b, i, c] = <real>(gq[b, i, c] + gs * k[b, j, c])
                        gk[b, j, c] = <real>(gk[b, j, c] + gs * q[b, i, c])
    return gq_arr, gk_arr, gv_arr


def interp_taps(Py_ssize_t n_in, Py_ssize_t n_out, str mode):
    lo_arr = np.empty(n_out, dtype=np.intp)
    hi_arr = np.empty(n_out, dtype=np.intp)
    w_arr = np.zeros(n_out, dtype=np.float64)
    cdef Py_ssize_t[::1] lo = lo_arr
    cdef Py_ssize_t[::1] hi = hi_arr
    cdef double[::1] w = w_arr
    cdef double ratio = <double>n_in / <double>n_out
    cdef double src
    cdef Py_ssize_t i, l
    cdef bint nearest = mode == "nearest"
    for i in range(n_out):
        if nearest:
            l = <Py_ssize_t>floor(i * ratio)
            if l > n_in - 1:
                l = n_in - 1
            lo[i] = l
            hi[i] = l
        else:
            src = (i + 0.5) * ratio - 0.5
            if src < 0.0:
                src = 0.0
            l = <Py_ssize_t>floor(src)
            if l > n_in - 1:
                l = n_in - 1
            lo[i] = l
            hi[i] = l + 1 if l + 1 < n_in else n_in - 1
            w[i] = src - l
    return lo_arr, hi_arr, w_arr


def resize_forward(const real[:, :, ::1] x, Py_ssize_t out_w, Py_ssize_t out_h, str mode):
    cdef Py_ssize_t N = x.shape[0], W = x.shape[1], H = x.shape[2]
    lw, hw, ww = interp_taps(W, out_w, mode)
    lh, hh, wh = interp_taps(H, out_h, mode)
    cdef Py_ssize_t[::1] lo_w = lw, hi_w = hw, lo_h = lh, hi_h = hh
    cdef double[::1] w_w = ww, w_h = wh
    dtype = np.float32 if real is float else np.float64
    out_arr = np.empty((N, out_w, out_h), dtype=dtype)
    cdef real[:, :, ::1] out = out_arr
    cdef Py_ssize_t n, i, j
    cdef double a, b, top, bottom
    with nogil:
        for n in range(N):
            for i in range(out_w):
                a = w_w[i]
                for j in range(out_h):
                    b = w_h[j]
                    top = (1.0 - b) * x[n, lo_w[i], lo_h[j]] + b * x[n, lo_w[i], hi_h[j]]
                    bottom = (1.0 - b) * x[n, hi_w[i], lo_h[j]] + b * x[n, hi_w[i], hi_h[j]]
                    out[n, i, j] = <real>((1.0 - a) * top + a * bottom)
    return out_arr


def resize_backward(const real[:, :, ::1] grad, Py_ssize_t in_w, Py_ssize_t in_h, str mode):
    cdef Py_ssize_t N = grad.shape[0], OW = grad.shape[1], OH = grad.shape[2]
    lw, hw, ww = interp_taps(in_w, OW, mode)
    lh, hh, wh = interp_taps(in_h, OH, mode)
    cdef Py_ssize_t[::1] lo_w = lw, hi_w = hw, lo_h = lh, hi_h = hh
    cdef double[::1] w_w = ww, w_h = wh
    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros((N, in_w, in_h), dtype=dtype)
    cdef real[:, :, ::1] out = out_arr
    cdef Py_ssize_t n, i, j
    cdef double a, b, g
    with nogil:
        for n in range(N):
            for i in range(OW):
                a = w_w[i]
                for j in range(OH):
                    b = w_h[j]
                    g = grad[n, i, j]
                    out[n, lo_w[i], lo_h[j]] += <real>((1.0 - a) * (1.0 - b) * g)
                    out[n, lo_w[i], hi_h[j]] += <real>((1.0 - a) * b * g)
                    out[n, hi_w[i], lo_h[j]] += <real>(a * (1.0 - b) * g)
                    out[n, hi_w[i], hi_h[j]] += <real>(a * b * g)
    return out_arr
