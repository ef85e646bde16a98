# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef double PIVOT_TOL = 1e-12


def pointwise_dominated(const double[:, ::1] vectors):
    cdef Py_ssize_t n = vectors.shape[0], d = vectors.shape[1]
    cdef Py_ssize_t i, j, s
    cdef bint ge, gt
    out = np.zeros(n, dtype=bool)
    cdef cnp.uint8_t[::1] res = out.view(np.uint8)
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            ge = True
            gt = False
            for s in range(d):
                if vectors[j, s] < vectors[i, s]:
                    ge = False
                    break
                if vectors[j, s] > vectors[i, s]:
                    gt = True
            if ge and (gt or j < i):
                res[i] = 1
                break
    return out


def witness_lp(const double[::1] alpha, const double[:, ::1] kept):
    cdef Py_ssize_t K = kept.shape[0], n = kept.shape[1]
    cdef Py_ssize_t nv = n, m = K + 1, ncol, i, j, r, k, piv_row
    cdef double big = 0.0, best, ratio, f, delta, tot, v
    if K == 0:
        b0 = np.zeros(n)
        b0[0] = 1.0
        return np.inf, b0
    D_arr = np.asarray(kept) - np.asarray(alpha)[None, :]
    cdef double[:, ::1] D = D_arr
    for k in range(K):
        for j in range(n):
            if D[k, j] > big:
                big = D[k, j]
    big += 1.0
    ncol = nv + m + 1
    tab_arr = np.zeros((m + 1, ncol))
    cdef double[:, ::1] tab = tab_arr
    for k in range(K):
        for j in range(n - 1):
            tab[k, j] = D[k, j] - D[k, n - 1]
        tab[k, n - 1] = 1.0
        tab[k, ncol - 1] = big - D[k, n - 1]
    for j in range(n - 1):
        tab[K, j] = 1.0
    tab[K, ncol - 1] = 1.0
    for i in range(m):
        tab[i, nv + i] = 1.0
    tab[m, n - 1] = -1.0
    basis_arr = np.arange(nv, nv + m, dtype=np.intp)
    cdef Py_ssize_t[::1] basis = basis_arr
    cdef Py_ssize_t it = 0, max_it = 50 * (m + nv)
    while it < max_it:
        it += 1
        j = -1
        for k in range(ncol - 1):
            if tab[m, k] < -PIVOT_TOL:
                j = k
                break
        if j < 0:
            break
        piv_row = -1
        best = 0.0
        for i in range(m):
            if tab[i, j] > PIVOT_TOL:
                ratio = tab[i, ncol - 1] / tab[i, j]
                if piv_row < 0 or ratio < best:
                    piv_row = i
                    best = ratio
        if piv_row < 0:
            break  # unbounded direction; cannot happen for a well-formed tableau
        f = best + 1e-15 * (fabs(best) if fabs(best) > 1.0 else 1.0)
        for i in range(m):
            if tab[i, j] > PIVOT_TOL and tab[i, ncol - 1] / tab[i, j] <= f and basis[i] < basis[piv_row]:
                piv_row = i
        i = piv_row
        f = tab[i, j]
        for k in range(ncol):
            tab[i, k] /= f
        for r in range(m + 1):
            if r != i and tab[r, j] != 0.0:
                f = tab[r, j]
                for k in range(ncol):
                    tab[r, k] -= f * tab[i, k]
        basis[i] = j
    x = np.zeros(nv)
    for i in range(m):
        if basis[i] < nv:
            x[basis[i]] = tab[i, ncol - 1]
    b = np.empty(n)
    tot = 0.0
    for j in range(n - 1):
        v = x[j] if x[j] > 0.0 else 0.0
        b[j] = v
        tot += v
    b[n - 1] = 1.0 - tot if tot < 1.0 else 0.0
    b /= b.sum()
    delta = float(np.min((np.asarray(alpha)[None, :] - np.asarray(kept)) @ b))
    return delta, b


# Backup and look-ahead are dominated by dense matrix products that BLAS already
# handles; compiled loops around them measured slower, so the numpy versions are shared.
from ._pykernels import backup_terms, lookahead_terms  # noqa: E402,F401
