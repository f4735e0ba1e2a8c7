# cython: language_level=3
"""Compiled pairwise-interaction kernels.

Same contracts as ``mfl._pykernels``.  Each kernel has its own inner loop
over atoms so the compiler can vectorise it.  The outer loop over evaluation
points runs under OpenMP; every inner sum is computed by one thread in a
fixed order, so results do not depend on the thread count.
"""
from cython.parallel cimport prange
from libc.math cimport exp

import numpy as np

# keep in sync with mfl.kernels.KERNEL_CODES
cdef enum:
    K_ZERO = 0
    K_IDENTITY = 1
    K_GAUSSIAN = 2
    K_TANH = 3
    K_ONE = 4


cdef inline double _sum_gaussian(double xi, const double* y, Py_ssize_t n) noexcept nogil:
    cdef double acc = 0.0, u
    cdef Py_ssize_t j
    for j in range(n):
        u = xi - y[j]
        acc += exp(-u * u)
    return acc


cdef inline double _sum_tanh(double xi, const double* y, Py_ssize_t n) noexcept nogil:
    # tanh(u) = 1 - 2 / (e^{2u} + 1) vectorises through exp; |u| <= 20 keeps e^{2u}
    # finite and tanh(20) already rounds to 1
    cdef double acc = 0.0, u
    cdef Py_ssize_t j
    for j in range(n):
        u = xi - y[j]
        u = 20.0 if u > 20.0 else (-20.0 if u < -20.0 else u)
        acc += 1.0 - 2.0 / (exp(2.0 * u) + 1.0)
    return acc


def conv_scalar(const double[::1] x, const double[::1] y, int code):
    """Return ``out[i] = mean_j g(x[i] - y[j])`` for the registry kernel ``code``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t natoms = y.shape[0]
    cdef Py_ssize_t i, j
    cdef double ysum = 0.0, inv = 1.0 / natoms
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    if code == K_ZERO:
        out[:] = 0.0
    elif code == K_ONE:
        out[:] = 1.0
    elif code == K_IDENTITY:
        # mean_j (x_i - y_j) = x_i - mean(y)
        for j in range(natoms):
            ysum += y[j]
        for i in range(n):
            o[i] = x[i] - ysum * inv
    elif code == K_GAUSSIAN:
        for i in prange(n, nogil=True, schedule="static"):
            o[i] = _sum_gaussian(x[i], &y[0], natoms) * inv
    elif code == K_TANH:
        for i in prange(n, nogil=True, schedule="static"):
            o[i] = _sum_tanh(x[i], &y[0], natoms) * inv
    else:
        raise ValueError(f"unknown kernel code {code}")
    return out


cdef void _dl_1d(double xi, const double* y, Py_ssize_t n, double th1, double th2, double th3,
                 double th4, bint want_grad, double* out) noexcept nogil:
    # out[0] = drift sum, out[1:5] = gradient sums
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0
    cdef double diff, r2, e2, e4
    cdef Py_ssize_t j
    if want_grad:
        for j in range(n):
            diff = xi - y[j]
            r2 = diff * diff
            e2 = exp(-th2 * r2) * diff
            e4 = exp(-th4 * r2) * diff
            s1 += e2
            s2 += r2 * e2
            s3 += e4
            s4 += r2 * e4
        # drift = 2 th1 th2 S1 - 2 th3 th4 S3; gradients from the same four sums
        out[0] = 2.0 * th1 * th2 * s1 - 2.0 * th3 * th4 * s3
        out[1] = 2.0 * th2 * s1
        out[2] = 2.0 * th1 * (s1 - th2 * s2)
        out[3] = -2.0 * th4 * s3
        out[4] = -2.0 * th3 * (s3 - th4 * s4)
    else:
        for j in range(n):
            diff = xi - y[j]
            r2 = diff * diff
            s0 += (2.0 * th1 * th2 * exp(-th2 * r2) - 2.0 * th3 * th4 * exp(-th4 * r2)) * diff
        out[0] = s0


def double_layer(const double[:, ::1] x, const double[:, ::1] y,
                 double th1, double th2, double th3, double th4,
                 bint want_grad=True):
    """Mean over atoms of the double-layer force and its parameter gradient.

    Returns ``(drift, grad)`` with shapes ``(n, d)`` and ``(n, d, 4)``;
    ``grad`` is ``None`` when ``want_grad`` is false.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t natoms = y.shape[0]
    cdef Py_ssize_t i, j, k, q
    cdef double r2, e2, e4, diff, a2, inv = 1.0 / natoms
    cdef double c1, c2, c3, c4
    drift = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] dr = drift
    cdef double[:, :, ::1] gr
    cdef double[:, ::1] tmp
    if want_grad:
        grad = np.zeros((n, d, 4), dtype=np.float64)
        gr = grad
    else:
        grad = None
        gr = np.zeros((1, 1, 4), dtype=np.float64)
    if d == 1:
        tmp = np.empty((n, 5), dtype=np.float64)
        for i in prange(n, nogil=True, schedule="static"):
            _dl_1d(x[i, 0], &y[0, 0], natoms, th1, th2, th3, th4, want_grad, &tmp[i, 0])
            dr[i, 0] = tmp[i, 0] * inv
            if want_grad:
                for q in range(4):
                    gr[i, 0, q] = tmp[i, q + 1] * inv
        return drift, grad
    for i in prange(n, nogil=True, schedule="static"):
        for j in range(natoms):
            r2 = 0.0
            for k in range(d):
                diff = x[i, k] - y[j, k]
                r2 = r2 + diff * diff
            e2 = exp(-th2 * r2)
            e4 = exp(-th4 * r2)
            a2 = 2.0 * th1 * th2 * e2 - 2.0 * th3 * th4 * e4
            if want_grad:
                c1 = 2.0 * th2 * e2
                c2 = 2.0 * th1 * (1.0 - th2 * r2) * e2
                c3 = -2.0 * th4 * e4
                c4 = -2.0 * th3 * (1.0 - th4 * r2) * e4
            for k in range(d):
                diff = x[i, k] - y[j, k]
                dr[i, k] += a2 * diff
                if want_grad:
                    gr[i, k, 0] += c1 * diff
                    gr[i, k, 1] += c2 * diff
                    gr[i, k, 2] += c3 * diff
                    gr[i, k, 3] += c4 * diff
        for k in range(d):
            dr[i, k] = dr[i, k] * inv
            if want_grad:
                gr[i, k, 0] = gr[i, k, 0] * inv
                gr[i, k, 1] = gr[i, k, 1] * inv
                gr[i, k, 2] = gr[i, k, 2] * inv
                gr[i, k, 3] = gr[i, k, 3] * inv
    return drift, grad
