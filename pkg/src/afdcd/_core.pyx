# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled mirror of the numpy kernel module (same contract, same names).

Plain C loops over typed memoryviews; no numpy C API. Accumulation is
row-major per output element, so results agree with the fallback to
floating-point reassociation error only.
"""
from libc.math cimport fabs, sqrt

import numpy as np

DIST_L2 = 0
DIST_L1 = 1
DIST_COSINE = 2


def conv2d_forward(object x, object kernel, object bias):
    cdef const double[:, :, ::1] xv = np.ascontiguousarray(x)
    cdef const double[:, :, :, ::1] kv = np.ascontiguousarray(kernel)
    cdef const double[::1] bv = np.ascontiguousarray(bias)
    cdef Py_ssize_t h = xv.shape[0], w = xv.shape[1], cin = xv.shape[2]
    cdef Py_ssize_t cout = kv.shape[0]
    out_arr = np.empty((h, w, cout))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, co, ci, di, dj, ii, jj
    cdef double acc
    for i in range(h):
        for j in range(w):
            for co in range(cout):
                acc = bv[co]
                for di in range(3):
                    ii = i + di - 1
                    if ii < 0 or ii >= h:
                        continue
                    for dj in range(3):
                        jj = j + dj - 1
                        if jj < 0 or jj >= w:
                            continue
                        for ci in range(cin):
                            acc += xv[ii, jj, ci] * kv[co, ci, di, dj]
                out[i, j, co] = acc
    return out_arr


def conv2d_backward(object x, object kernel, object upstream):
    cdef const double[:, :, ::1] xv = np.ascontiguousarray(x)
    cdef const double[:, :, :, ::1] kv = np.ascontiguousarray(kernel)
    cdef const double[:, :, ::1] up = np.ascontiguousarray(upstream)
    cdef Py_ssize_t h = xv.shape[0], w = xv.shape[1], cin = xv.shape[2]
    cdef Py_ssize_t cout = kv.shape[0]
    gx_arr = np.zeros((h, w, cin))
    gk_arr = np.zeros((cout, cin, 3, 3))
    gb_arr = np.zeros(cout)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gk = gk_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t i, j, co, ci, di, dj, ii, jj
    cdef double u
    for i in range(h):
        for j in range(w):
            for co in range(cout):
                u = up[i, j, co]
                gb[co] += u
                for di in range(3):
                    ii = i + di - 1
                    if ii < 0 or ii >= h:
                        continue
                    for dj in range(3):
                        jj = j + dj - 1
                        if jj < 0 or jj >= w:
                            continue
                        for ci in range(cin):
                            gk[co, ci, di, dj] += u * xv[ii, jj, ci]
                            gx[ii, jj, ci] += u * kv[co, ci, di, dj]
    return gx_arr, gk_arr, gb_arr


def max_pool_forward(object x, int k):
    cdef const double[:, :, ::1] xv = np.ascontiguousarray(x)
    cdef Py_ssize_t h = xv.shape[0], w = xv.shape[1], c = xv.shape[2]
    cdef Py_ssize_t oh = h // k, ow = w // k
    pooled_arr = np.empty((oh, ow, c))
    argmax_arr = np.empty((oh, ow, c), dtype=np.int64)
    cdef double[:, :, ::1] pooled = pooled_arr
    cdef long[:, :, ::1] argmax = argmax_arr
    cdef Py_ssize_t oi, oj, ch, di, dj
    cdef double best, v
    cdef long best_at
    for oi in range(oh):
        for oj in range(ow):
            for ch in range(c):
                best = xv[oi * k, oj * k, ch]
                best_at = 0
                for di in range(k):
                    for dj in range(k):
                        v = xv[oi * k + di, oj * k + dj, ch]
                        if v > best:
                            best = v
                            best_at = di * k + dj
                pooled[oi, oj, ch] = best
                argmax[oi, oj, ch] = best_at
    return pooled_arr, argmax_arr


def max_pool_backward(object argmax, object upstream, int k):
    cdef const long[:, :, ::1] am = np.ascontiguousarray(argmax, dtype=np.int64)
    cdef const double[:, :, ::1] up = np.ascontiguousarray(upstream)
    cdef Py_ssize_t oh = am.shape[0], ow = am.shape[1], c = am.shape[2]
    out_arr = np.zeros((oh * k, ow * k, c))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t oi, oj, ch
    cdef long at
    for oi in range(oh):
        for oj in range(ow):
            for ch in range(c):
                at = am[oi, oj, ch]
                out[oi * k + at // k, oj * k + at % k, ch] = up[oi, oj, ch]
    return out_arr


def pairwise_distances(object s, object t, int kind):
    cdef const double[:, :, ::1] sv = np.ascontiguousarray(s)
    cdef const double[:, :, ::1] tv = np.ascontiguousarray(t)
    cdef Py_ssize_t b = sv.shape[0], n = sv.shape[1], dim = sv.shape[2]
    cdef Py_ssize_t m = tv.shape[1]
    out_arr = np.empty((b, n, m))
    cdef double[:, :, ::1] out = out_arr
    sn_arr = np.empty((b, n))
    tn_arr = np.empty((b, m))
    cdef double[:, ::1] sn = sn_arr, tn = tn_arr
    cdef Py_ssize_t i, r, j, d
    cdef double acc, diff
    if kind == DIST_L2:
        for i in range(b):
            for r in range(n):
                for j in range(m):
                    acc = 0.0
                    for d in range(dim):
                        diff = sv[i, r, d] - tv[i, j, d]
                        acc += diff * diff
                    out[i, r, j] = acc
        return out_arr
    if kind == DIST_L1:
        for i in range(b):
            for r in range(n):
                for j in range(m):
                    acc = 0.0
                    for d in range(dim):
                        acc += fabs(sv[i, r, d] - tv[i, j, d])
                    out[i, r, j] = acc
        return out_arr
    if kind == DIST_COSINE:
        for i in range(b):
            for r in range(n):
                acc = 0.0
                for d in range(dim):
                    acc += sv[i, r, d] * sv[i, r, d]
                sn[i, r] = sqrt(acc)
            for j in range(m):
                acc = 0.0
                for d in range(dim):
                    acc += tv[i, j, d] * tv[i, j, d]
                tn[i, j] = sqrt(acc)
            for r in range(n):
                for j in range(m):
                    acc = 0.0
                    for d in range(dim):
                        acc += sv[i, r, d] * tv[i, j, d]
                    out[i, r, j] = 1.0 - acc / (sn[i, r] * tn[i, j])
        return out_arr
    raise ValueError(f"unknown distance kind code {kind}")


def pairwise_distances_backward(object s, object t, object g, int kind):
    cdef const double[:, :, ::1] sv = np.ascontiguousarray(s)
    cdef const double[:, :, ::1] tv = np.ascontiguousarray(t)
    cdef const double[:, :, ::1] gv = np.ascontiguousarray(g)
    cdef Py_ssize_t b = sv.shape[0], n = sv.shape[1], dim = sv.shape[2]
    cdef Py_ssize_t m = tv.shape[1]
    out_arr = np.zeros((b, n, dim))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, r, j, d
    cdef double gg, acc, cosv, csum, snorm, tnorm, diff
    if kind == DIST_L2:
        for i in range(b):
            for r in range(n):
                for j in range(m):
                    gg = gv[i, r, j]
                    if gg == 0.0:
                        continue
                    for d in range(dim):
                        out[i, r, d] += 2.0 * gg * (sv[i, r, d] - tv[i, j, d])
        return out_arr
    if kind == DIST_L1:
        for i in range(b):
            for r in range(n):
                for j in range(m):
                    gg = gv[i, r, j]
                    if gg == 0.0:
                        continue
                    for d in range(dim):
                        diff = sv[i, r, d] - tv[i, j, d]
                        if diff > 0.0:
                            out[i, r, d] += gg
                        elif diff < 0.0:
                            out[i, r, d] -= gg
        return out_arr
    if kind == DIST_COSINE:
        for i in range(b):
            for r in range(n):
                acc = 0.0
                for d in range(dim):
                    acc += sv[i, r, d] * sv[i, r, d]
                snorm = sqrt(acc)
                csum = 0.0
                for j in range(m):
                    acc = 0.0
                    tnorm = 0.0
                    for d in range(dim):
                        acc += sv[i, r, d] * tv[i, j, d]
                        tnorm += tv[i, j, d] * tv[i, j, d]
                    tnorm = sqrt(tnorm)
                    cosv = acc / (snorm * tnorm)
                    gg = gv[i, r, j]
                    csum += gg * cosv
                    if gg != 0.0:
                        for d in range(dim):
                            out[i, r, d] -= gg * tv[i, j, d] / (tnorm * snorm)
                for d in range(dim):
                    out[i, r, d] += sv[i, r, d] * csum / (snorm * snorm)
        return out_arr
    raise ValueError(f"unknown distance kind code {kind}")
