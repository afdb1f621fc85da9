# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_kernels_py``.

Same signatures and results (up to floating-point summation order).
"""

import numpy as np

from libc.math cimport fabs, sqrt
from libc.stdlib cimport qsort, malloc, free
from scipy.linalg.cython_blas cimport dgemm

BACKEND = "cython"


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef double x = (<const double*>a)[0]
    cdef double y = (<const double*>b)[0]
    if x < y:
        return 1
    if x > y:
        return -1
    return 0


cdef void _sort_desc(double* v, Py_ssize_t r) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double key
    if r > 32:
        qsort(v, r, sizeof(double), _cmp_desc)
        return
    for i in range(1, r):
        key = v[i]
        k = i - 1
        while k >= 0 and v[k] < key:
            v[k + 1] = v[k]
            k -= 1
        v[k + 1] = key


cdef void _project_cols(double[:, ::1] x, double radius, double* work) noexcept nogil:
    cdef Py_ssize_t r = x.shape[0], n = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double total, css, css_k, theta, a, v
    for j in range(n):
        total = 0.0
        for i in range(r):
            work[i] = fabs(x[i, j])
            total += work[i]
        if total <= radius * (1.0 + 1e-12):
            continue
        _sort_desc(work, r)
        css = 0.0
        k = 1
        css_k = work[0]
        for i in range(r):
            css += work[i]
            if work[i] - (css - radius) / (i + 1) > 0:
                k = i + 1
                css_k = css
        theta = (css_k - radius) / k
        for i in range(r):
            v = x[i, j]
            a = fabs(v) - theta
            if a <= 0.0:
                x[i, j] = 0.0
            elif v > 0.0:
                x[i, j] = a
            else:
                x[i, j] = -a


def project_l1_columns(x, double radius=1.0):
    """Project every column of ``x`` onto the L1 ball of the given radius."""
    cdef double[:, ::1] out = np.array(x, dtype=np.float64, order="C", copy=True, ndmin=2)
    cdef double* work = <double*>malloc(max(out.shape[0], 1) * sizeof(double))
    if work == NULL:
        raise MemoryError()
    try:
        with nogil:
            _project_cols(out, radius, work)
    finally:
        free(work)
    return np.asarray(out)


cdef void _matmul(const double[:, ::1] a, const double[:, ::1] b, double[:, ::1] out) noexcept nogil:
    # row-major out = a @ b is column-major out^T = b^T @ a^T
    cdef int r = <int>a.shape[0], p = <int>a.shape[1], n = <int>b.shape[1]
    cdef double one = 1.0, zero = 0.0
    cdef char trans = b'N'
    dgemm(&trans, &trans, &n, &r, &p, &one, <double*>&b[0, 0], &n,
          <double*>&a[0, 0], &p, &zero, &out[0, 0], &n)


cdef double _dot(const double[:, ::1] a, const double[:, ::1] b) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc = 0.0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            acc += a[i, j] * b[i, j]
    return acc


cdef double _objective(const double[:, ::1] gram, const double[:, ::1] lin, double beta,
                       const double[:, ::1] l, double[:, ::1] tmp) noexcept nogil:
    _matmul(gram, l, tmp)
    return 0.5 * beta * _dot(l, tmp) - _dot(lin, l)


def quad_objective(gram, lin, double beta, l):
    cdef double[:, ::1] g = np.ascontiguousarray(gram, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(lin, dtype=np.float64)
    cdef double[:, ::1] lv = np.ascontiguousarray(l, dtype=np.float64)
    cdef double[:, ::1] tmp = np.empty_like(np.asarray(lv))
    return _objective(g, c, beta, lv, tmp)


def nesterov_l(gram, lin, double beta, l0, double chi, double omega0=1.0,
               int max_iter=1000, int max_backtracks=60):
    """Accelerated projected gradient on ``beta/2 <L, gram L> - <lin, L>``."""
    cdef double[:, ::1] g = np.ascontiguousarray(gram, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(lin, dtype=np.float64)
    cdef double[:, ::1] l_prev = np.array(l0, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t r = l_prev.shape[0], n = l_prev.shape[1]
    cdef double[:, ::1] l_cur = np.array(l_prev, copy=True)
    cdef double[:, ::1] l_new = np.empty((r, n))
    cdef double[:, ::1] best = np.array(l_prev, copy=True)
    cdef double[:, ::1] s = np.empty((r, n))
    cdef double[:, ::1] gs = np.empty((r, n))
    cdef double[:, ::1] grad = np.empty((r, n))
    cdef double[:, ::1] tmp = np.empty((r, n))
    cdef double[:, ::1] swap
    cdef double* work = <double*>malloc(max(r, 1) * sizeof(double))
    if work == NULL:
        raise MemoryError()

    cdef double best_g, d_prev2 = 0.0, d_prev = 1.0, omega = omega0
    cdef double alpha, g_s, w, dn2, lin_term, g_new = 0.0, diff
    cdef bint converged = False
    cdef int t = 0, jb, it
    cdef Py_ssize_t i, j

    try:
        with nogil:
            best_g = _objective(g, c, beta, l_cur, tmp)
            for it in range(1, max_iter + 1):
                t = it
                alpha = (d_prev2 - 1.0) / d_prev
                for i in range(r):
                    for j in range(n):
                        s[i, j] = l_cur[i, j] + alpha * (l_cur[i, j] - l_prev[i, j])
                _matmul(g, s, gs)
                g_s = 0.5 * beta * _dot(s, gs) - _dot(c, s)
                for i in range(r):
                    for j in range(n):
                        grad[i, j] = beta * gs[i, j] - c[i, j]
                for jb in range(max_backtracks + 1):
                    w = omega * (2.0 ** jb)
                    for i in range(r):
                        for j in range(n):
                            l_new[i, j] = s[i, j] - grad[i, j] / w
                    _project_cols(l_new, 1.0, work)
                    dn2 = 0.0
                    lin_term = 0.0
                    for i in range(r):
                        for j in range(n):
                            diff = l_new[i, j] - s[i, j]
                            dn2 += diff * diff
                            lin_term += grad[i, j] * diff
                    if sqrt(dn2) < chi:
                        converged = True
                        break
                    g_new = _objective(g, c, beta, l_new, tmp)
                    if g_new <= g_s + lin_term + 0.5 * w * dn2:
                        omega = w
                        break
                if converged:
                    g_new = _objective(g, c, beta, l_new, tmp)
                if g_new < best_g:
                    best_g = g_new
                    best[:, :] = l_new
                if converged:
                    break
                # rotate buffers: prev <- cur <- new
                swap = l_prev
                l_prev = l_cur
                l_cur = l_new
                l_new = swap
                d_prev2 = d_prev
                d_prev = 0.5 * (1.0 + sqrt(1.0 + 4.0 * d_prev * d_prev))
    finally:
        free(work)
    return np.asarray(best).copy(), best_g, t, converged
