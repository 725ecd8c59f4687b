"""Hot numeric kernels.

Each kernel exists twice: a vectorised numpy version (``*_numpy``) and an
explicit-loop version compiled with numba (``*_numba``). The public name
dispatches on :data:`edmlngm._accel.USE_NUMBA`. Both paths are always
importable so the benchmark can compare them side by side.

Vectorisation convention for an ``n x d`` increment is column-major: entry
``(i, a)`` sits at flat index ``i + n*a``.
"""

import numpy as np

from ._accel import USE_NUMBA, numba

__all__ = [
    "sq_dist_matrix",
    "gauss_newton_blocks",
    "pair_distance_sum",
    "sq_dist_matrix_numpy",
    "gauss_newton_blocks_numpy",
    "pair_distance_sum_numpy",
    "sq_dist_matrix_numba",
    "gauss_newton_blocks_numba",
    "pair_distance_sum_numba",
]


# --------------------------------------------------------------------------
# numpy paths


def sq_dist_matrix_numpy(P):
    diff = P[:, None, :] - P[None, :, :]
    return np.einsum("ija,ija->ij", diff, diff)


def gauss_newton_blocks_numpy(P):
    n, d = P.shape
    diff = P[:, None, :] - P[None, :, :]
    H1 = np.empty((n * d, n * d))
    for a in range(d):
        for b in range(a, d):
            W = diff[:, :, a] * diff[:, :, b]
            block = 2.0 * (np.diag(W.sum(axis=1)) - W)
            H1[a * n:(a + 1) * n, b * n:(b + 1) * n] = block
            if a != b:
                H1[b * n:(b + 1) * n, a * n:(a + 1) * n] = block.T
    return H1


def pair_distance_sum_numpy(P):
    diff = P[:, None, :] - P[None, :, :]
    return float(np.sqrt(np.einsum("ija,ija->ij", diff, diff)).sum())


# --------------------------------------------------------------------------
# loop paths (numba-compiled when available)


def _sq_dist_matrix_loops(P):
    n, d = P.shape
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for a in range(d):
                t = P[i, a] - P[j, a]
                s += t * t
            D[i, j] = s
            D[j, i] = s
    return D


def _gauss_newton_blocks_loops(P):
    n, d = P.shape
    H1 = np.zeros((n * d, n * d))
    for a in range(d):
        for b in range(a, d):
            ra = a * n
            rb = b * n
            for i in range(n):
                diag = 0.0
                for j in range(n):
                    if j != i:
                        w = 2.0 * (P[i, a] - P[j, a]) * (P[i, b] - P[j, b])
                        H1[ra + i, rb + j] = -w
                        diag += w
                H1[ra + i, rb + i] = diag
            if a != b:
                for i in range(n):
                    for j in range(n):
                        H1[rb + j, ra + i] = H1[ra + i, rb + j]
    return H1


def _pair_distance_sum_loops(P):
    n, d = P.shape
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for a in range(d):
                t = P[i, a] - P[j, a]
                s += t * t
            total += np.sqrt(s)
    return 2.0 * total


if numba is not None:
    sq_dist_matrix_numba = numba.njit(cache=True)(_sq_dist_matrix_loops)
    gauss_newton_blocks_numba = numba.njit(cache=True)(_gauss_newton_blocks_loops)
    pair_distance_sum_numba = numba.njit(cache=True)(_pair_distance_sum_loops)
else:  # pragma: no cover
    sq_dist_matrix_numba = _sq_dist_matrix_loops
    gauss_newton_blocks_numba = _gauss_newton_blocks_loops
    pair_distance_sum_numba = _pair_distance_sum_loops


# --------------------------------------------------------------------------
# dispatch


def _c(P):
    return np.ascontiguousarray(P, dtype=np.float64)


if USE_NUMBA:

    def sq_dist_matrix(P):
        """Pairwise squared distances of the rows of ``P``."""
        return sq_dist_matrix_numba(_c(P))

    def gauss_newton_blocks(P):
        """Dense ``J^T J`` part of the stress Hessian (residual-free)."""
        return gauss_newton_blocks_numba(_c(P))

    def pair_distance_sum(P):
        """Sum of ``||p_i - p_j||`` over all ordered pairs."""
        return float(pair_distance_sum_numba(_c(P)))

else:

    def sq_dist_matrix(P):
        """Pairwise squared distances of the rows of ``P``."""
        return sq_dist_matrix_numpy(_c(P))

    def gauss_newton_blocks(P):
        """Dense ``J^T J`` part of the stress Hessian (residual-free)."""
        return gauss_newton_blocks_numpy(_c(P))

    def pair_distance_sum(P):
        """Sum of ``||p_i - p_j||`` over all ordered pairs."""
        return pair_distance_sum_numpy(_c(P))
