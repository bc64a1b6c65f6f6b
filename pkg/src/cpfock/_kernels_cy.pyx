# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled map-iteration kernels.

Same contract as ``_kernels_py``: inputs are a (n, d, d) complex128 Kraus
stack and a (d, d) complex128 matrix.  The triple loops beat BLAS dispatch
for the small dimensions (d <= 64) this toolkit iterates over thousands of
times.
"""

import numpy as np

cimport cython


cdef void _apply(const double complex[:, :, ::1] a,
                 const double complex[:, ::1] x,
                 double complex[:, ::1] tmp,
                 double complex[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t d = a.shape[1]
    cdef Py_ssize_t k, i, j, l
    cdef double complex s
    for i in range(d):
        for j in range(d):
            out[i, j] = 0
    for k in range(n):
        for i in range(d):
            for j in range(d):
                s = 0
                for l in range(d):
                    s = s + a[k, i, l] * x[l, j]
                tmp[i, j] = s
        for i in range(d):
            for j in range(d):
                s = 0
                for l in range(d):
                    s = s + tmp[i, l] * a[k, j, l].conjugate()
                out[i, j] = out[i, j] + s


cdef void _apply_adj(const double complex[:, :, ::1] a,
                     const double complex[:, ::1] x,
                     double complex[:, ::1] tmp,
                     double complex[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t d = a.shape[1]
    cdef Py_ssize_t k, i, j, l
    cdef double complex s
    for i in range(d):
        for j in range(d):
            out[i, j] = 0
    for k in range(n):
        for i in range(d):
            for j in range(d):
                s = 0
                for l in range(d):
                    s = s + a[k, l, i].conjugate() * x[l, j]
                tmp[i, j] = s
        for i in range(d):
            for j in range(d):
                s = 0
                for l in range(d):
                    s = s + tmp[i, l] * a[k, l, j]
                out[i, j] = out[i, j] + s


cdef inline tuple _prep(object a, object x):
    cdef object aa = np.ascontiguousarray(a, dtype=np.complex128)
    cdef object xx = np.ascontiguousarray(x, dtype=np.complex128)
    return aa, xx


def apply_map(a, x):
    """Sum of a[k] @ x @ a[k]^* over k."""
    aa, xx = _prep(a, x)
    d = xx.shape[0]
    out = np.empty((d, d), dtype=np.complex128)
    tmp = np.empty((d, d), dtype=np.complex128)
    _apply(aa, xx, tmp, out)
    return out


def apply_adjoint(a, x):
    """Sum of a[k]^* @ x @ a[k] over k."""
    aa, xx = _prep(a, x)
    d = xx.shape[0]
    out = np.empty((d, d), dtype=np.complex128)
    tmp = np.empty((d, d), dtype=np.complex128)
    _apply_adj(aa, xx, tmp, out)
    return out


def power_apply(a, x, k):
    """k-fold application of the map; k=0 returns a copy of x."""
    aa, xx = _prep(a, x)
    cdef Py_ssize_t steps = k
    cdef Py_ssize_t d = xx.shape[0]
    cur = xx.copy()
    nxt = np.empty((d, d), dtype=np.complex128)
    tmp = np.empty((d, d), dtype=np.complex128)
    cdef const double complex[:, :, ::1] av = aa
    cdef double complex[:, ::1] curv = cur
    cdef double complex[:, ::1] nxtv = nxt
    cdef double complex[:, ::1] tmpv = tmp
    cdef Py_ssize_t j
    with nogil:
        for j in range(steps):
            _apply(av, curv, tmpv, nxtv)
            curv, nxtv = nxtv, curv
    # after an even number of buffer swaps the result lives in `cur`
    return cur if steps % 2 == 0 else nxt


def cesaro_mean(a, x, k):
    """(x + phi(x) + ... + phi^(k-1)(x)) / k."""
    return neumann_sum(a, x, k) / k


def neumann_sum(a, x, k):
    """x + phi(x) + ... + phi^(k-1)(x)."""
    aa, xx = _prep(a, x)
    cdef Py_ssize_t terms = k
    cdef Py_ssize_t d = xx.shape[0]
    acc = xx.copy()
    cur = xx.copy()
    nxt = np.empty((d, d), dtype=np.complex128)
    tmp = np.empty((d, d), dtype=np.complex128)
    cdef const double complex[:, :, ::1] av = aa
    cdef double complex[:, ::1] accv = acc
    cdef double complex[:, ::1] curv = cur
    cdef double complex[:, ::1] nxtv = nxt
    cdef double complex[:, ::1] tmpv = tmp
    cdef Py_ssize_t j, i, l
    with nogil:
        for j in range(terms - 1):
            _apply(av, curv, tmpv, nxtv)
            curv, nxtv = nxtv, curv
            for i in range(d):
                for l in range(d):
                    accv[i, l] = accv[i, l] + curv[i, l]
    return acc


def power_traces(a, x, kmax):
    """Traces of phi^j(x) for j = 0..kmax, as a complex array."""
    aa, xx = _prep(a, x)
    cdef Py_ssize_t kk = kmax
    cdef Py_ssize_t d = xx.shape[0]
    out = np.empty(kmax + 1, dtype=np.complex128)
    cur = xx.copy()
    nxt = np.empty((d, d), dtype=np.complex128)
    tmp = np.empty((d, d), dtype=np.complex128)
    cdef double complex[:] outv = out
    cdef const double complex[:, :, ::1] av = aa
    cdef double complex[:, ::1] curv = cur
    cdef double complex[:, ::1] nxtv = nxt
    cdef double complex[:, ::1] tmpv = tmp
    cdef Py_ssize_t j, i
    cdef double complex s
    with nogil:
        s = 0
        for i in range(d):
            s = s + curv[i, i]
        outv[0] = s
        for j in range(1, kk + 1):
            _apply(av, curv, tmpv, nxtv)
            curv, nxtv = nxtv, curv
            s = 0
            for i in range(d):
                s = s + curv[i, i]
            outv[j] = s
    return out
