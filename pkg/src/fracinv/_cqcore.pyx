# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-marching kernel for backward Euler convolution quadrature.

Solves, for j = 1..N,

    cw * M * sum_{k=0}^{j} w_k D_{j-k} + S D_j = B_j,    D_0 = 0,

with symmetric tridiagonal ``M`` and ``A = cw * w_0 * M + S``.  The history
sum is split into blocks: contributions from earlier blocks are one matrix
product with a Toeplitz slice of ``w`` (BLAS dgemm), the rest is summed
step by step inside the block.
"""
import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


def march(const double[::1] w, double cw,
          const double[::1] md, const double[::1] me,
          const double[::1] ad, const double[::1] ae,
          const double[:, ::1] loads, int block=64):
    cdef Py_ssize_t nsteps = loads.shape[0]
    cdef Py_ssize_t n = loads.shape[1]
    if w.shape[0] < nsteps + 1:
        raise ValueError("need at least N + 1 quadrature weights")
    if md.shape[0] != n or ad.shape[0] != n or me.shape[0] != n - 1 or ae.shape[0] != n - 1:
        raise ValueError("matrix sizes do not match the load vectors")
    if block < 1:
        raise ValueError("block must be positive")

    out = np.zeros((nsteps + 1, n))
    cdef double[:, ::1] D = out
    cdef double[::1] inv = np.empty(n)
    cdef double[::1] cp = np.empty(n)
    cdef double[::1] rhs = np.empty(n)
    cdef double[:, ::1] H = np.empty((block, n))
    cdef double[:, ::1] T = np.empty((block, nsteps if nsteps > 0 else 1))
    cdef Py_ssize_t i, p, r, j, j0, nb, kfar
    cdef double c, den
    cdef int bm, bn, bk, lda, ldb, ldc
    cdef double one = 1.0, zero = 0.0
    cdef char *no = b"N"

    # Thomas factorization of A
    inv[0] = 1.0 / ad[0]
    for i in range(1, n):
        cp[i - 1] = ae[i - 1] * inv[i - 1]
        den = ad[i] - ae[i - 1] * cp[i - 1]
        if den == 0.0:
            raise ZeroDivisionError("singular step matrix")
        inv[i] = 1.0 / den

    j0 = 1
    while j0 <= nsteps:
        nb = min(<Py_ssize_t>block, nsteps + 1 - j0)
        kfar = j0 - 1
        if kfar > 0:
            for r in range(nb):
                for i in range(kfar):
                    T[r, i] = w[j0 + r - 1 - i]
            # H[:nb] = T[:nb, :kfar] @ D[1:j0], in column-major terms
            bm = <int>n
            bn = <int>nb
            bk = <int>kfar
            lda = <int>n
            ldb = <int>T.shape[1]
            ldc = <int>n
            dgemm(no, no, &bm, &bn, &bk, &one, &D[1, 0], &lda, &T[0, 0], &ldb,
                  &zero, &H[0, 0], &ldc)
        else:
            for r in range(nb):
                for p in range(n):
                    H[r, p] = 0.0

        for r in range(nb):
            j = j0 + r
            for i in range(j0, j):
                c = w[j - i]
                for p in range(n):
                    H[r, p] += c * D[i, p]
            # rhs = B_j - cw * M * H_j
            if n == 1:
                rhs[0] = loads[j - 1, 0] - cw * md[0] * H[r, 0]
            else:
                rhs[0] = loads[j - 1, 0] - cw * (md[0] * H[r, 0] + me[0] * H[r, 1])
                for p in range(1, n - 1):
                    rhs[p] = loads[j - 1, p] - cw * (me[p - 1] * H[r, p - 1]
                                                     + md[p] * H[r, p] + me[p] * H[r, p + 1])
                rhs[n - 1] = loads[j - 1, n - 1] - cw * (me[n - 2] * H[r, n - 2]
                                                         + md[n - 1] * H[r, n - 1])
            # forward and back substitution
            rhs[0] = rhs[0] * inv[0]
            for p in range(1, n):
                rhs[p] = (rhs[p] - ae[p - 1] * rhs[p - 1]) * inv[p]
            D[j, n - 1] = rhs[n - 1]
            for p in range(n - 2, -1, -1):
                D[j, p] = rhs[p] - cp[p] * D[j, p + 1]
        j0 += nb
    return out
