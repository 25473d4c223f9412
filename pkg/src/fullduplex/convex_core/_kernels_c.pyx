# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the barrier solver kernels (see ``_kernels_py``)."""

import numpy as np
from libc.math cimport sqrt, log, INFINITY
from scipy.linalg.cython_lapack cimport zheev

__all__ = ["logdet_derivs", "quad_root_min", "hpd_logdet", "congruence_map", "affine_sum",
           "chol_inv", "min_eig", "min_gen_eig", "from_vec"]


cdef inline double complex _conj(double complex z) noexcept nogil:
    return z.real - 1j * z.imag


cdef int _chol(const double complex[:, :] a, double complex[:, ::1] low, Py_ssize_t n) noexcept nogil:
    """Lower Cholesky factor; returns 1 if ``a`` is not positive definite."""
    cdef Py_ssize_t i, j, k
    cdef double s, d
    cdef double complex acc
    for j in range(n):
        s = a[j, j].real
        for k in range(j):
            s -= low[j, k].real * low[j, k].real + low[j, k].imag * low[j, k].imag
        if not s > 0.0:
            return 1
        d = sqrt(s)
        low[j, j] = d
        for i in range(j + 1, n):
            acc = a[i, j]
            for k in range(j):
                acc = acc - low[i, k] * _conj(low[j, k])
            low[i, j] = acc / d
        for i in range(j):
            low[i, j] = 0.0
    return 0


cdef void _tri_inv(double complex[:, ::1] low, double complex[:, ::1] inv, Py_ssize_t n) noexcept nogil:
    """Inverse of a lower-triangular matrix by forward substitution."""
    cdef Py_ssize_t i, j, k
    cdef double complex acc
    for j in range(n):
        for i in range(n):
            inv[i, j] = 0.0
        inv[j, j] = 1.0 / low[j, j]
        for i in range(j + 1, n):
            acc = 0.0
            for k in range(j, i):
                acc = acc + low[i, k] * inv[k, j]
            inv[i, j] = -acc / low[i, i]


def hpd_logdet(a):
    cdef const double complex[:, :] av = np.ascontiguousarray(a, dtype=complex)
    cdef Py_ssize_t n = av.shape[0], j
    cdef double complex[:, ::1] low = np.empty((n, n), dtype=complex)
    cdef double out = 0.0
    if _chol(av, low, n):
        return -INFINITY
    for j in range(n):
        out += log(low[j, j].real)
    return 2.0 * out


def affine_sum(a0, maps, z):
    cdef const double complex[:, :] a0v = np.ascontiguousarray(a0, dtype=complex)
    cdef const double complex[:, :, :] mv = np.ascontiguousarray(maps, dtype=complex)
    cdef const double[:] zv = np.ascontiguousarray(z, dtype=float)
    cdef Py_ssize_t n = mv.shape[0], m = a0v.shape[0], a, i, j
    out = np.array(a0v, dtype=complex, copy=True)
    cdef double complex[:, ::1] ov = out
    cdef double w
    for a in range(n):
        w = zv[a]
        if w == 0.0:
            continue
        for i in range(m):
            for j in range(m):
                ov[i, j] = ov[i, j] + w * mv[a, i, j]
    return out


def logdet_derivs(a, maps):
    cdef const double complex[:, :] av = np.ascontiguousarray(a, dtype=complex)
    cdef const double complex[:, :, :] mv = np.ascontiguousarray(maps, dtype=complex)
    cdef Py_ssize_t n = mv.shape[0], m = av.shape[0]
    cdef Py_ssize_t p, q, i, j, k
    cdef double complex[:, ::1] low = np.empty((m, m), dtype=complex)
    cdef double complex[:, ::1] ci = np.empty((m, m), dtype=complex)
    cdef double complex[:, ::1] tmp = np.empty((m, m), dtype=complex)
    y_arr = np.empty((n, m, m), dtype=complex)
    cdef double complex[:, :, ::1] y = y_arr
    grad_arr = np.empty(n)
    hess_arr = np.empty((n, n))
    cdef double[::1] grad = grad_arr
    cdef double[:, ::1] hess = hess_arr
    cdef double complex acc
    cdef double s
    if _chol(av, low, m):
        raise np.linalg.LinAlgError("matrix is not positive definite")
    _tri_inv(low, ci, m)
    for p in range(n):
        # tmp = M_p C^H, y_p = C tmp
        for i in range(m):
            for j in range(m):
                acc = 0.0
                for k in range(j + 1):
                    acc = acc + mv[p, i, k] * _conj(ci[j, k])
                tmp[i, j] = acc
        for i in range(m):
            for j in range(m):
                acc = 0.0
                for k in range(i + 1):
                    acc = acc + ci[i, k] * tmp[k, j]
                y[p, i, j] = acc
        s = 0.0
        for i in range(m):
            s += y[p, i, i].real
        grad[p] = s
    for p in range(n):
        for q in range(p + 1):
            s = 0.0
            for i in range(m):
                for j in range(m):
                    s += y[p, i, j].real * y[q, i, j].real + y[p, i, j].imag * y[q, i, j].imag
            hess[p, q] = -s
            hess[q, p] = -s
    return grad_arr, hess_arr


def congruence_map(s):
    """T with ``T @ to_vec(Y) == to_vec(S Y S^H)`` using the sparse basis structure."""
    cdef const double complex[:, :] sv = np.ascontiguousarray(s, dtype=complex)
    cdef Py_ssize_t n = sv.shape[0], nn = n * n
    cdef Py_ssize_t a, b, e, f, i, j, k, l
    # each basis matrix has at most two nonzeros (k, l, coefficient)
    cdef Py_ssize_t[:, ::1] kk = np.zeros((nn, 2), dtype=np.intp)
    cdef Py_ssize_t[:, ::1] ll = np.zeros((nn, 2), dtype=np.intp)
    cdef double complex[:, ::1] cc = np.zeros((nn, 2), dtype=complex)
    cdef Py_ssize_t[::1] cnt = np.zeros(nn, dtype=np.intp)
    cdef double r = 1.0 / sqrt(2.0)
    a = 0
    for k in range(n):
        kk[a, 0] = k; ll[a, 0] = k; cc[a, 0] = 1.0; cnt[a] = 1
        a += 1
    for k in range(n):
        for l in range(k + 1, n):
            kk[a, 0] = k; ll[a, 0] = l; cc[a, 0] = r
            kk[a, 1] = l; ll[a, 1] = k; cc[a, 1] = r
            cnt[a] = 2
            a += 1
            kk[a, 0] = k; ll[a, 0] = l; cc[a, 0] = 1j * r
            kk[a, 1] = l; ll[a, 1] = k; cc[a, 1] = -1j * r
            cnt[a] = 2
            a += 1
    out = np.empty((nn, nn))
    cdef double[:, ::1] t = out
    cdef double complex[:, ::1] x = np.empty((n, n), dtype=complex)
    cdef double complex acc
    for a in range(nn):
        # x = S E_a S^H
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for e in range(cnt[a]):
                    acc = acc + sv[i, kk[a, e]] * cc[a, e] * _conj(sv[j, ll[a, e]])
                x[i, j] = acc
        # T[b, a] = Re tr(E_b x) = Re sum E_b[k, l] x[l, k]
        for b in range(nn):
            acc = 0.0
            for f in range(cnt[b]):
                acc = acc + cc[b, f] * x[ll[b, f], kk[b, f]]
            t[b, a] = acc.real
    return out


def quad_root_min(c0, d1, d2):
    cdef const double[:] c = np.ascontiguousarray(c0, dtype=float)
    cdef const double[:] p = np.ascontiguousarray(d1, dtype=float)
    cdef const double[:] q = np.ascontiguousarray(d2, dtype=float)
    cdef Py_ssize_t k
    cdef double best = INFINITY, s, disc
    for k in range(c.shape[0]):
        if q[k] > 0:
            disc = sqrt(p[k] * p[k] + 2.0 * q[k] * c[k])
            if p[k] >= 0:
                s = (p[k] + disc) / q[k]
            else:
                s = 2.0 * c[k] / (disc - p[k])
        elif p[k] < 0:
            s = -c[k] / p[k]
        else:
            continue
        if s < best:
            best = s
    return best


def chol_inv(q):
    cdef const double complex[:, :] qv = np.ascontiguousarray(q, dtype=complex)
    cdef Py_ssize_t n = qv.shape[0], i, j, k
    low_arr = np.empty((n, n), dtype=complex)
    inv_arr = np.empty((n, n), dtype=complex)
    cdef double complex[:, ::1] low = low_arr
    cdef double complex[:, ::1] ci = np.empty((n, n), dtype=complex)
    cdef double complex[:, ::1] inv = inv_arr
    cdef double complex acc
    if _chol(qv, low, n):
        raise np.linalg.LinAlgError("matrix is not positive definite")
    _tri_inv(low, ci, n)
    # q^-1 = C^H C with C = L^-1 lower triangular
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(i if i > j else j, n):
                acc = acc + _conj(ci[k, i]) * ci[k, j]
            inv[i, j] = acc
    return low_arr, inv_arr


cdef double _min_eig_buf(double complex[:, ::1] a, Py_ssize_t n):
    cdef int nn = <int>n, lwork = <int>(4 * n), info = 0
    cdef char jobz = b'N', uplo = b'L'
    cdef double[::1] w = np.empty(n)
    cdef double complex[::1] work = np.empty(4 * n, dtype=complex)
    cdef double[::1] rwork = np.empty(3 * n, dtype=float)
    # row-major storage is the transpose, which has the same eigenvalues
    zheev(&jobz, &uplo, &nn, &a[0, 0], &nn, &w[0], &work[0], &lwork, &rwork[0], &info)
    if info != 0:
        raise np.linalg.LinAlgError("eigenvalue iteration failed")
    return w[0]


def min_eig(y):
    cdef double complex[:, ::1] a = np.array(y, dtype=complex, order="C", copy=True)
    return _min_eig_buf(a, a.shape[0])


def min_gen_eig(a, b):
    cdef const double complex[:, :] av = np.ascontiguousarray(a, dtype=complex)
    cdef const double complex[:, :] bv = np.ascontiguousarray(b, dtype=complex)
    cdef Py_ssize_t n = av.shape[0], i, j, k
    cdef double complex[:, ::1] low = np.empty((n, n), dtype=complex)
    cdef double complex[:, ::1] ci = np.empty((n, n), dtype=complex)
    cdef double complex[:, ::1] tmp = np.empty((n, n), dtype=complex)
    cdef double complex[:, ::1] m = np.empty((n, n), dtype=complex)
    cdef double complex acc
    if _chol(av, low, n):
        raise np.linalg.LinAlgError("matrix is not positive definite")
    _tri_inv(low, ci, n)
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(j + 1):
                acc = acc + bv[i, k] * _conj(ci[j, k])
            tmp[i, j] = acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(i + 1):
                acc = acc + ci[i, k] * tmp[k, j]
            m[i, j] = acc
    for i in range(n):
        for j in range(i):
            acc = 0.5 * (m[i, j] + _conj(m[j, i]))
            m[i, j] = acc
            m[j, i] = _conj(acc)
        m[i, i] = m[i, i].real
    return _min_eig_buf(m, n)


def from_vec(z, Py_ssize_t n):
    cdef const double[:] zv = np.ascontiguousarray(z, dtype=float)
    out = np.zeros((n, n), dtype=complex)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t a = 0, k, l
    cdef double r = 1.0 / sqrt(2.0)
    for k in range(n):
        o[k, k] = zv[a]
        a += 1
    for k in range(n):
        for l in range(k + 1, n):
            o[k, l] = r * zv[a] + 1j * r * zv[a + 1]
            o[l, k] = r * zv[a] - 1j * r * zv[a + 1]
            a += 2
    return out
