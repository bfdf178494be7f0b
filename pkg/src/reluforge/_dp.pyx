# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: segmented least squares over gridded knots and PWL node simplification."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef inline double _cost(const double[::1] P0, const double[::1] P1, const double[::1] P2,
                         const double[::1] t, Py_ssize_t p, Py_ssize_t j) nogil:
    cdef double s0 = P0[j] - P0[p]
    cdef double s1 = P1[j] - P1[p]
    cdef double s2 = P2[j] - P2[p]
    cdef double ell = t[j] - t[p]
    cdef double mid = 0.5 * (t[j] + t[p])
    cdef double s1c = s1 - mid * s0
    cdef double e = s2 - s0 * s0 / ell - 12.0 * s1c * s1c / (ell * ell * ell)
    return e if e > 0.0 else 0.0


def segmented_dp(const double[::1] P0, const double[::1] P1, const double[::1] P2,
                 const double[::1] t, int n):
    """Table D[r, j] of the best r-piece error on cells [0, j) and the argmin knots."""
    cdef Py_ssize_t G = t.shape[0] - 1
    cdef Py_ssize_t j, p, r, rmax
    cdef double e, cand
    D_arr = np.full((G + 1, n + 1), np.inf)
    A_arr = np.full((G + 1, n + 1), -1, dtype=np.int64)
    cdef double[:, ::1] D = D_arr
    cdef cnp.int64_t[:, ::1] A = A_arr
    D[0, 0] = 0.0
    with nogil:
        for j in range(1, G + 1):
            rmax = n if n < j else j
            for p in range(j):
                e = _cost(P0, P1, P2, t, p, j)
                for r in range(1, rmax + 1):
                    cand = D[p, r - 1] + e
                    if cand < D[j, r]:
                        D[j, r] = cand
                        A[j, r] = p
    return D_arr.T.copy(), A_arr.T.copy()


def simplify_nodes(const double[::1] t, const double[::1] v, double tol):
    """Greedy slope-cone simplification: indices of the nodes to keep."""
    cdef Py_ssize_t n = t.shape[0]
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] keep = out
    cdef Py_ssize_t m = 1, a = 0, j = 1
    cdef double lo = -INFINITY, hi = INFINITY, dt, s, x
    keep[0] = 0
    with nogil:
        while j < n:
            dt = t[j] - t[a]
            s = (v[j] - v[a]) / dt
            if lo <= s <= hi:
                x = (v[j] - tol - v[a]) / dt
                if x > lo:
                    lo = x
                x = (v[j] + tol - v[a]) / dt
                if x < hi:
                    hi = x
                j += 1
                continue
            a = j - 1
            keep[m] = a
            m += 1
            lo = -INFINITY
            hi = INFINITY
        if n > 1 and keep[m - 1] != n - 1:
            keep[m] = n - 1
            m += 1
    return out[:m].copy()
