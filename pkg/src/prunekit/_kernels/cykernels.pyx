# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-example kernels. Same contracts as pykernels."""

from libc.math cimport exp, sqrt

import numpy as np

BACKEND = "cython"


cdef void _matvec(double[:, ::1] w, double[::1] h, double[::1] out) noexcept:
    # Four accumulators so the reduction can use SIMD lanes without
    # reassociation flags; summation order is fixed and deterministic.
    cdef Py_ssize_t j, i
    cdef Py_ssize_t cols = w.shape[1]
    cdef Py_ssize_t tail = cols - (cols & 3)
    cdef double a0, a1, a2, a3
    for j in range(w.shape[0]):
        a0 = a1 = a2 = a3 = 0.0
        for i in range(0, tail, 4):
            a0 += w[j, i] * h[i]
            a1 += w[j, i + 1] * h[i + 1]
            a2 += w[j, i + 2] * h[i + 2]
            a3 += w[j, i + 3] * h[i + 3]
        for i in range(tail, cols):
            a0 += w[j, i] * h[i]
        out[j] = (a0 + a1) + (a2 + a3)


cdef void _softmax_inplace(double[::1] z) noexcept:
    cdef Py_ssize_t i, n = z.shape[0]
    cdef double m = z[0]
    cdef double s = 0.0
    for i in range(1, n):
        if z[i] > m:
            m = z[i]
    for i in range(n):
        z[i] = exp(z[i] - m)
        s += z[i]
    for i in range(n):
        z[i] /= s


def forward_one(list weights, list biases, bint relu, double[::1] x):
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t l, j
    cdef double[:, ::1] w
    cdef double[::1] z, b, h = x
    hs = [np.asarray(x)]
    logits = None
    for l in range(n_layers):
        w = weights[l]
        z_nd = np.empty(w.shape[0])
        z = z_nd
        _matvec(w, h, z)
        if biases[l] is not None:
            b = biases[l]
            for j in range(z.shape[0]):
                z[j] += b[j]
        if l < n_layers - 1:
            if relu:
                for j in range(z.shape[0]):
                    if z[j] < 0.0:
                        z[j] = 0.0
            hs.append(z_nd)
            h = z
        else:
            logits = z_nd
    probs_nd = np.array(logits, copy=True)
    cdef double[::1] probs = probs_nd
    _softmax_inplace(probs)
    return hs, logits, probs_nd


def backward_one(list weights, list biases, bint relu, double[::1] x, Py_ssize_t y):
    hs, _, probs_nd = forward_one(weights, biases, relu, x)
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t l, j, i
    delta_nd = np.array(probs_nd, copy=True)
    cdef double[::1] delta = delta_nd
    cdef double[::1] h, nxt
    cdef double[:, ::1] w, gw
    delta[y] -= 1.0
    gws = [None] * n_layers
    gbs = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        h = hs[l]
        w = weights[l]
        gw_nd = np.empty((w.shape[0], w.shape[1]))
        gw = gw_nd
        for j in range(w.shape[0]):
            for i in range(w.shape[1]):
                gw[j, i] = delta[j] * h[i]
        gws[l] = gw_nd
        if biases[l] is not None:
            gbs[l] = delta_nd.copy()
        if l > 0:
            nxt_nd = np.zeros(w.shape[1])
            nxt = nxt_nd
            for j in range(w.shape[0]):
                for i in range(w.shape[1]):
                    nxt[i] += w[j, i] * delta[j]
            if relu:
                for i in range(w.shape[1]):
                    if h[i] <= 0.0:
                        nxt[i] = 0.0
            delta_nd = nxt_nd
            delta = nxt
    return gws, gbs


def grand_norm_one(list weights, list biases, bint relu, double[::1] x, Py_ssize_t y):
    # Accumulates the squares of the same per-coordinate gradient entries
    # backward_one materializes, without storing the outer products.
    hs, _, probs_nd = forward_one(weights, biases, relu, x)
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t l, j, i
    delta_nd = np.array(probs_nd, copy=True)
    cdef double[::1] delta = delta_nd
    cdef double[::1] h, nxt
    cdef double[:, ::1] w
    cdef double acc = 0.0
    cdef double dj, t0, t1, t2, t3, a0, a1, a2, a3
    cdef Py_ssize_t cols, tail
    cdef bint has_bias
    delta[y] -= 1.0
    for l in range(n_layers - 1, -1, -1):
        h = hs[l]
        w = weights[l]
        has_bias = biases[l] is not None
        cols = w.shape[1]
        tail = cols - (cols & 3)
        for j in range(w.shape[0]):
            dj = delta[j]
            a0 = a1 = a2 = a3 = 0.0
            for i in range(0, tail, 4):
                t0 = dj * h[i]
                t1 = dj * h[i + 1]
                t2 = dj * h[i + 2]
                t3 = dj * h[i + 3]
                a0 += t0 * t0
                a1 += t1 * t1
                a2 += t2 * t2
                a3 += t3 * t3
            for i in range(tail, cols):
                t0 = dj * h[i]
                a0 += t0 * t0
            acc += (a0 + a1) + (a2 + a3)
            if has_bias:
                acc += dj * dj
        if l > 0:
            nxt_nd = np.zeros(w.shape[1])
            nxt = nxt_nd
            for j in range(w.shape[0]):
                for i in range(w.shape[1]):
                    nxt[i] += w[j, i] * delta[j]
            if relu:
                for i in range(w.shape[1]):
                    if h[i] <= 0.0:
                        nxt[i] = 0.0
            delta_nd = nxt_nd
            delta = nxt
    return sqrt(acc)
