"""NumPy implementation of the convolution quadrature time march.

Same contract as the compiled ``march``: blocked history summation, with
the per-step tridiagonal solve replaced by two precomputed dense operators
so that each step costs two small matrix-vector products.
"""
import numpy as np


def _dense(d, e):
    return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)


def march(w, cw, md, me, ad, ae, loads, block=64):
    loads = np.ascontiguousarray(loads, dtype=float)
    nsteps, n = loads.shape
    w = np.asarray(w, dtype=float)
    if w.size < nsteps + 1:
        raise ValueError("need at least N + 1 quadrature weights")
    if len(md) != n or len(ad) != n or len(me) != n - 1 or len(ae) != n - 1:
        raise ValueError("matrix sizes do not match the load vectors")
    A = _dense(ad, ae)
    # D_j = A^{-1} B_j - cw A^{-1} M H_j
    X0 = np.linalg.solve(A, loads.T).T
    P = cw * np.linalg.solve(A, _dense(md, me))
    PT = np.ascontiguousarray(P.T)
    D = np.zeros((nsteps + 1, n))
    for j0 in range(1, nsteps + 1, block):
        nb = min(block, nsteps + 1 - j0)
        if j0 > 1:
            lag = (j0 + np.arange(nb))[:, None] - np.arange(1, j0)[None, :]
            H = w[lag] @ D[1:j0]
        else:
            H = np.zeros((nb, n))
        for r in range(nb):
            j = j0 + r
            h = H[r]
            if j > j0:
                h = h + w[j - j0:0:-1] @ D[j0:j]
            D[j] = X0[j - 1] - h @ PT
    return D
