"""Linear and structural maps of EDM theory.

Covers the Lindenstrauss operator ``K`` and its adjoint, the squared
distance map, the centring basis ``V``, the packed lower-trapezoidal
parameterisation and the QR reduction that removes rotations.

Coordinates used throughout the package:

* ``P``  -- ``n x d`` configuration, row ``i`` is point ``p_i``;
* ``L``  -- ``(n-1) x d`` reduced configuration with ``P = V L``;
* ``ell`` -- packed vector of length ``tri_len(n, d)`` with ``L = ltriag(ell)``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import hashlib
import json
from typing import NamedTuple, Optional

import numpy as np

from .errors import DimensionError, DomainError, SymmetryError, ValidationError
from .kernels import sq_dist_matrix

SYM_TOL = 1e-12


def _check_square(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    return M


def _check_symmetric(M, name="matrix", tol=SYM_TOL):
    M = _check_square(M, name)
    scale = 1.0 + np.abs(M).max(initial=0.0)
    asym = np.abs(M - M.T).max(initial=0.0)
    if asym > tol * scale:
        raise SymmetryError(f"{name} is not symmetric (max |M - M^T| = {asym:.3e})")
    return M


def lindenstrauss(G):
    """``K(G) = diag(G) e^T + e diag(G)^T - 2 G``.

    Maps a Gram matrix to the EDM of the underlying points. The diagonal of
    the result is set to exactly zero.
    """
    G = _check_symmetric(G, "G")
    g = np.diag(G)
    D = g[:, None] + g[None, :] - 2.0 * G
    np.fill_diagonal(D, 0.0)
    return D


def lindenstrauss_adjoint(S):
    """``K*(S) = 2 (Diag(S e) - S)``, a generalised Laplacian.

    Rows sum to zero for every symmetric ``S``; diagonal matrices lie in the
    null space; ``S >= 0`` elementwise gives a positive semidefinite result.
    """
    S = _check_symmetric(S, "S")
    return 2.0 * (np.diag(S.sum(axis=1)) - S)


def edm_of(P):
    """Squared pairwise distances of the rows of ``P`` (``K(P P^T)``)."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2:
        raise DimensionError(f"configuration must be 2-D, got shape {P.shape}")
    return sq_dist_matrix(P)


@lru_cache(maxsize=64)
def _build_v_cached(n):
    # Householder reflector sending e to sqrt(n) e_1; columns 2..n span e-perp.
    v = np.ones(n)
    v[0] -= np.sqrt(n)
    H = np.eye(n) - (2.0 / (v @ v)) * np.outer(v, v)
    V = np.ascontiguousarray(H[:, 1:])
    V.setflags(write=False)
    return V


def build_v(n):
    """Orthonormal ``n x (n-1)`` basis of the complement of ``e``.

    Deterministic for fixed ``n``; ``V^T V = I``, ``V^T e = 0`` and
    ``V V^T = I - e e^T / n``. The returned array is read-only.
    """
    n = int(n)
    if n < 2:
        raise DomainError(f"build_v needs n >= 2, got {n}")
    return _build_v_cached(n)


def tri(k):
    """Triangular number ``k (k + 1) / 2``."""
    return k * (k + 1) // 2


def tri_len(n, d):
    """Number of free entries of a lower-trapezoidal ``(n-1) x d`` matrix."""
    n, d = int(n), int(d)
    if n < 2 or d < 1:
        raise DomainError(f"tri_len needs n >= 2 and d >= 1, got n={n}, d={d}")
    if d >= n - 1:
        return tri(n - 1)
    return (n - 1) * d - tri(d - 1)


@lru_cache(maxsize=128)
def _tri_index(n, d):
    # column-major walk over the positions (i, j) with j <= i
    rows, cols = [], []
    for j in range(min(d, n - 1)):
        for i in range(j, n - 1):
            rows.append(i)
            cols.append(j)
    rows = np.array(rows, dtype=np.intp)
    cols = np.array(cols, dtype=np.intp)
    flat = rows + (n - 1) * cols
    for a in (rows, cols, flat):
        a.setflags(write=False)
    return rows, cols, flat


def tri_index(n, d):
    """Row indices, column indices and column-major flat indices of the
    lower-trapezoidal slots, in packing order."""
    tri_len(n, d)
    return _tri_index(int(n), int(d))


def ltriag(ell, n, d):
    """Unpack ``ell`` into a lower-trapezoidal ``(n-1) x d`` matrix."""
    ell = np.asarray(ell, dtype=float)
    t = tri_len(n, d)
    if ell.shape != (t,):
        raise DomainError(f"expected a vector of length tri_len({n}, {d}) = {t}, got shape {ell.shape}")
    rows, cols, _ = _tri_index(int(n), int(d))
    L = np.zeros((n - 1, d))
    L[rows, cols] = ell
    return L


def ltriag_adjoint(L):
    """Pack the lower-trapezoidal part of ``L`` (entries above are dropped)."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2:
        raise DimensionError(f"L must be 2-D, got shape {L.shape}")
    rows, cols, _ = tri_index(L.shape[0] + 1, L.shape[1])
    return L[rows, cols].copy()


def center(P):
    """Subtract the centroid from every row."""
    P = np.asarray(P, dtype=float)
    return P - P.mean(axis=0, keepdims=True)


class TriangularReduction(NamedTuple):
    ell: np.ndarray
    Q: np.ndarray
    rank_deficient: bool


def reduce_to_triangular(L, rank_tol=1e-8):
    """Rotate ``L`` to lower-trapezoidal form.

    Returns ``(ell, Q, rank_deficient)`` with ``ltriag(ell) @ Q.T == L``.
    Pivots of the triangular factor are made nonnegative, which fixes the
    sign freedom of the QR factorisation. ``rank_deficient`` flags a
    smallest pivot below ``rank_tol`` times the largest; the factorisation is
    then valid but not unique.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2:
        raise DimensionError(f"L must be 2-D, got shape {L.shape}")
    m, d = L.shape
    Q, R = np.linalg.qr(L.T, mode="complete")
    k = min(m, d)
    signs = np.ones(d)
    piv = np.diag(R)[:k]
    signs[:k] = np.where(piv < 0, -1.0, 1.0)
    Q = Q * signs[None, :]
    R = R * signs[:, None]
    ell = ltriag_adjoint(R.T)
    piv = np.abs(np.diag(R)[:k])
    big = piv.max(initial=0.0)
    deficient = bool(k < d or big == 0.0 or piv.min() <= rank_tol * big)
    return TriangularReduction(ell, Q, deficient)


# --------------------------------------------------------------------------
# problem data


@dataclass(frozen=True, eq=False)
class Instance:
    """Point recovery problem data.

    ``D`` holds squared distances. ``P_bar``, when known, is a configuration
    whose EDM is ``D`` (a global minimiser of the stress).
    """

    n: int
    d: int
    D: np.ndarray
    P_bar: Optional[np.ndarray] = None
    seed: Optional[int] = None
    _hash: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        D = np.array(self.D, dtype=float)
        D.setflags(write=False)
        object.__setattr__(self, "D", D)
        if self.P_bar is not None:
            Pb = np.array(self.P_bar, dtype=float)
            Pb.setflags(write=False)
            object.__setattr__(self, "P_bar", Pb)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "d", int(self.d))

    @classmethod
    def from_points(cls, P, seed=None):
        P = np.asarray(P, dtype=float)
        if P.ndim != 2:
            raise DimensionError(f"P must be 2-D, got shape {P.shape}")
        inst = cls(P.shape[0], P.shape[1], edm_of(P), P, seed)
        inst.validate()
        return inst

    @property
    def d_norm_sq(self):
        return float(np.sum(self.D * self.D))

    def validate(self, strict=False):
        """Raise :class:`ValidationError` naming the first failed invariant."""
        n, d, D = self.n, self.d, self.D
        if n < 2:
            raise ValidationError("n >= 2", f"n = {n}")
        if d < 1:
            raise ValidationError("d >= 1", f"d = {d}")
        if D.shape != (n, n):
            raise ValidationError("D has shape n x n", f"shape {D.shape}, n = {n}")
        if not np.all(np.isfinite(D)):
            raise ValidationError("D is finite")
        scale = 1.0 + np.abs(D).max()
        asym = np.abs(D - D.T).max()
        if asym > SYM_TOL * scale:
            raise ValidationError("D is symmetric", f"max asymmetry {asym:.3e}")
        dg = np.abs(np.diag(D)).max()
        if dg > SYM_TOL * scale:
            raise ValidationError("D has zero diagonal", f"max |diag| {dg:.3e}")
        if D.min() < -SYM_TOL * scale:
            raise ValidationError("D is nonnegative", f"min entry {D.min():.3e}")
        if self.P_bar is not None:
            Pb = self.P_bar
            if Pb.shape != (n, d):
                raise ValidationError("P_bar has shape n x d", f"shape {Pb.shape}")
            if not np.all(np.isfinite(Pb)):
                raise ValidationError("P_bar is finite")
            err = np.abs(edm_of(Pb) - D).max()
            if err > SYM_TOL * scale:
                raise ValidationError("D equals the EDM of P_bar", f"max deviation {err:.3e}")
        if strict:
            J = np.eye(n) - 1.0 / n
            G = -0.5 * J @ D @ J
            w = np.linalg.eigvalsh(0.5 * (G + G.T))
            if w[0] < -1e-10 * scale:
                raise ValidationError("centred Gram matrix is PSD", f"min eigenvalue {w[0]:.3e}")
            if n > d and w[n - d - 1] > 1e-10 * scale:
                raise ValidationError("embedding dimension <= d", f"eigenvalue {w[n - d - 1]:.3e}")
        return self

    def to_dict(self):
        out = {"n": self.n, "d": self.d, "D": self.D.tolist()}
        if self.P_bar is not None:
            out["P_bar"] = self.P_bar.tolist()
        out["seed"] = self.seed
        return out

    def digest(self):
        """SHA-256 of the canonical JSON encoding (cached)."""
        if not self._hash:
            blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
            self._hash.append(hashlib.sha256(blob.encode()).hexdigest())
        return self._hash[0]


def random_instance(n, d, seed=0):
    """Centred standard-normal generator configuration and its exact EDM."""
    if n < 2 or d < 1:
        raise DomainError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    P = center(rng.standard_normal((n, d)))
    return Instance(n, d, edm_of(P), P, seed).validate()
