# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel core. Same contract as `_py`; see that module's docstring."""

import numpy as np

from libc.math cimport log
from libc.stdlib cimport free, malloc

from ..errors import ContractViolation, DegeneracyError

BISECT_ITERS = 40


cdef inline double _row_dot(const double* row, const double* v, Py_ssize_t n) noexcept:
    # four independent accumulators so the reduction vectorises without
    # needing float reassociation flags
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t j = 0
    while j + 4 <= n:
        s0 += row[j] * v[j]
        s1 += row[j + 1] * v[j + 1]
        s2 += row[j + 2] * v[j + 2]
        s3 += row[j + 3] * v[j + 3]
        j += 4
    while j < n:
        s0 += row[j] * v[j]
        j += 1
    return (s0 + s1) + (s2 + s3)


def sm_update(double[:, ::1] inv, double[::1] v):
    cdef Py_ssize_t n = inv.shape[0]
    cdef Py_ssize_t i, j
    cdef double denom = 1.0
    cdef double s, wi
    if inv.shape[1] != n or v.shape[0] != n:
        raise ContractViolation(
            f"rank-1 update shape mismatch: {(inv.shape[0], inv.shape[1])} vs {(v.shape[0],)}")
    cdef double* w = <double*> malloc(n * sizeof(double))
    if w == NULL:
        raise MemoryError()
    try:
        for i in range(n):
            s = _row_dot(&inv[i, 0], &v[0], n)
            w[i] = s
            denom += s * v[i]
        if denom <= 0.0:
            raise DegeneracyError(f"non-positive update denominator {denom}")
        for i in range(n):
            wi = w[i] / denom
            for j in range(n):
                inv[i, j] -= wi * w[j]
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.5 * (inv[i, j] + inv[j, i])
                inv[i, j] = s
                inv[j, i] = s
    finally:
        free(w)


def quad_form(double[:, ::1] mat, double[::1] v):
    cdef Py_ssize_t n = mat.shape[0]
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        acc += _row_dot(&mat[i, 0], &v[0], n) * v[i]
    return acc


cdef Py_ssize_t _max_width(list weights):
    cdef Py_ssize_t m = 0
    cdef double[:, ::1] w
    for obj in weights:
        w = obj
        if w.shape[0] > m:
            m = w.shape[0]
        if w.shape[1] > m:
            m = w.shape[1]
    return m


cdef inline double _head_dot(double[:, ::1] w, double* a) noexcept:
    # half-paired summation so an antisymmetric head over mirrored
    # activations cancels exactly (each pair is t + (-t) = 0)
    cdef Py_ssize_t cols = w.shape[1]
    cdef Py_ssize_t h = cols // 2
    cdef Py_ssize_t c
    cdef double s = 0.0
    for c in range(h):
        s += w[0, c] * a[c] + w[0, c + h] * a[c + h]
    if cols % 2:
        s += w[0, cols - 1] * a[cols - 1]
    return s


def mlp_forward(list weights, double[::1] x, list masks=None):
    cdef Py_ssize_t L = len(weights)
    cdef Py_ssize_t width = _max_width(weights)
    cdef double* a = <double*> malloc(width * sizeof(double))
    cdef double* b = <double*> malloc(width * sizeof(double))
    cdef double* tmp
    cdef double[:, ::1] w
    cdef double[::1] mask
    cdef Py_ssize_t i, r, c, rows, cols
    cdef double s, out
    if a == NULL or b == NULL:
        free(a)
        free(b)
        raise MemoryError()
    try:
        cols = x.shape[0]
        for c in range(cols):
            a[c] = x[c]
        for i in range(L - 1):
            w = weights[i]
            rows = w.shape[0]
            cols = w.shape[1]
            for r in range(rows):
                s = 0.0
                for c in range(cols):
                    s += w[r, c] * a[c]
                if s < 0.0:
                    s = 0.0
                b[r] = s
            if masks is not None:
                mask = masks[i]
                for r in range(rows):
                    b[r] *= mask[r]
            tmp = a
            a = b
            b = tmp
        out = _head_dot(weights[L - 1], a)
    finally:
        free(a)
        free(b)
    return out


def mlp_grad(list weights, double[::1] x, double[::1] grad_out):
    cdef Py_ssize_t L = len(weights)
    cdef Py_ssize_t width = _max_width(weights)
    cdef Py_ssize_t d = x.shape[0]
    # activation stack: layer 0 is the input, layers 1..L the outputs
    cdef double* acts = <double*> malloc((d + L * width) * sizeof(double))
    cdef double* delta = <double*> malloc(width * sizeof(double))
    cdef double* delta2 = <double*> malloc(width * sizeof(double))
    cdef double* tmp
    cdef double[:, ::1] w
    cdef Py_ssize_t i, r, c, rows, cols, base, prev_base, off
    cdef double s, out
    if acts == NULL or delta == NULL or delta2 == NULL:
        free(acts)
        free(delta)
        free(delta2)
        raise MemoryError()
    try:
        for c in range(d):
            acts[c] = x[c]
        base = 0
        for i in range(L - 1):
            w = weights[i]
            rows = w.shape[0]
            cols = w.shape[1]
            prev_base = base
            base = d + i * width
            for r in range(rows):
                s = 0.0
                for c in range(cols):
                    s += w[r, c] * acts[prev_base + c]
                if s < 0.0:
                    s = 0.0
                acts[base + r] = s
        prev_base = d + (L - 2) * width if L > 1 else 0
        out = _head_dot(weights[L - 1], acts + prev_base)
        acts[d + (L - 1) * width] = out

        off = 0
        for obj in weights:
            w = obj
            off += w.shape[0] * w.shape[1]
        delta[0] = 1.0
        for i in range(L - 1, -1, -1):
            w = weights[i]
            rows = w.shape[0]
            cols = w.shape[1]
            prev_base = d + (i - 1) * width if i > 0 else 0
            off -= rows * cols
            for r in range(rows):
                s = delta[r]
                for c in range(cols):
                    grad_out[off + r * cols + c] = s * acts[prev_base + c]
            if i > 0:
                # propagate through W_i and the ReLU of layer i-1
                for c in range(cols):
                    s = 0.0
                    for r in range(rows):
                        s += w[r, c] * delta[r]
                    if acts[prev_base + c] <= 0.0:
                        s = 0.0
                    delta2[c] = s
                tmp = delta
                delta = delta2
                delta2 = tmp
    finally:
        free(acts)
        free(delta)
        free(delta2)
    return out


def klucb_solve(p_arr, allowance_arr):
    p_arr = np.ascontiguousarray(p_arr, dtype=np.float64)
    allowance_arr = np.ascontiguousarray(allowance_arr, dtype=np.float64)
    out = np.empty_like(p_arr)
    cdef double[::1] p = p_arr
    cdef double[::1] allow = allowance_arr
    cdef double[::1] q = out
    cdef Py_ssize_t k, it
    cdef double lo, hi, mid, kl, pk, cpk
    for k in range(p.shape[0]):
        pk = p[k]
        cpk = 1.0 - pk
        lo = pk
        hi = 1.0
        for it in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            kl = 0.0
            if pk > 0.0:
                kl += pk * log(pk / mid)
            if cpk > 0.0:
                kl += cpk * log(cpk / (1.0 - mid))
            if kl <= allow[k]:
                lo = mid
            else:
                hi = mid
        q[k] = lo
    return out
