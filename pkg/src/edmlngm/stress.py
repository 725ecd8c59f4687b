"""Smooth stress ``f(P) = 0.5 * ||K(P P^T) - Dbar||_F^2`` and its derivatives.

Three coordinate systems are supported through :class:`EvalContext`:

``FULL_P``          ``P``, an ``n x d`` array
``REDUCED_L``       ``L``, an ``(n-1) x d`` array, ``P = V L``
``TRIANGULAR_ELL``  ``ell``, a vector of length ``tri_len(n, d)``, ``L = ltriag(ell)``

Dense Hessians use column-major vectorisation of the matrix variable
(``flat = i + rows * a``); in ``TRIANGULAR_ELL`` the variable is already a
vector in packing order.
"""

from dataclasses import dataclass
import enum
from typing import NamedTuple

import numpy as np

from .edm_core import Instance, build_v, ltriag, ltriag_adjoint, tri_index, tri_len
from .errors import CapacityError, DimensionError, DomainError
from .kernels import gauss_newton_blocks, sq_dist_matrix

MAX_DENSE_COLUMNS = 5000


class Formulation(str, enum.Enum):
    FULL_P = "P"
    REDUCED_L = "L"
    TRIANGULAR_ELL = "ell"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip()
        for f in cls:
            if key in (f.value, f.name, f.name.lower()):
                return f
        raise DomainError(f"unknown formulation {value!r}; expected one of P, L, ell")


@dataclass(frozen=True, eq=False)
class EvalContext:
    """Formulation plus instance; immutable and safe to share."""

    formulation: Formulation
    instance: Instance
    V: np.ndarray

    @classmethod
    def make(cls, instance, formulation=Formulation.FULL_P):
        return cls(Formulation.parse(formulation), instance, build_v(instance.n))

    def with_formulation(self, formulation):
        return EvalContext(Formulation.parse(formulation), self.instance, self.V)

    @property
    def n(self):
        return self.instance.n

    @property
    def d(self):
        return self.instance.d

    @property
    def shape(self):
        n, d = self.n, self.d
        if self.formulation is Formulation.FULL_P:
            return (n, d)
        if self.formulation is Formulation.REDUCED_L:
            return (n - 1, d)
        return (tri_len(n, d),)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def check(self, x, name="x"):
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            raise DimensionError(
                f"{name} has shape {x.shape}, expected {self.shape} for formulation {self.formulation.value}"
            )
        return x

    def to_P(self, x):
        """Lift a point of this formulation to an ``n x d`` configuration."""
        x = self.check(x)
        if self.formulation is Formulation.FULL_P:
            return x
        if self.formulation is Formulation.REDUCED_L:
            return self.V @ x
        return self.V @ ltriag(x, self.n, self.d)

    def pull_back(self, G):
        """Adjoint of the lift: map an ``n x d`` cotangent to this formulation."""
        if self.formulation is Formulation.FULL_P:
            return G
        GL = self.V.T @ G
        if self.formulation is Formulation.REDUCED_L:
            return GL
        return ltriag_adjoint(GL)


class HessianParts(NamedTuple):
    """Dense Hessian ``H = 4*H1 + 2*H2`` in the context's coordinates.

    ``H1`` is the Gauss-Newton part (always PSD); ``H2`` carries the
    residual and vanishes exactly at global minimisers.
    """

    F: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    H: np.ndarray


def residual(P, D):
    """``F(P) = EDM(P) - D``; hollow and symmetric."""
    P = np.asarray(P, dtype=float)
    D = np.asarray(D, dtype=float)
    if P.ndim != 2 or D.shape != (P.shape[0], P.shape[0]):
        raise DimensionError(f"P shape {P.shape} incompatible with D shape {D.shape}")
    return sq_dist_matrix(P) - D


def _laplacian(S):
    return 2.0 * (np.diag(S.sum(axis=1)) - S)


def value(x, ctx):
    F = residual(ctx.to_P(x), ctx.instance.D)
    return 0.5 * float(np.sum(F * F))


def value_and_gradient(x, ctx):
    P = ctx.to_P(x)
    F = residual(P, ctx.instance.D)
    G = 2.0 * (_laplacian(F) @ P)
    return 0.5 * float(np.sum(F * F)), ctx.pull_back(G)


def gradient(x, ctx):
    """Analytic gradient ``4 (Diag(F e) - F) P``, pulled back by the chain rule."""
    return value_and_gradient(x, ctx)[1]


def _full_hessian_apply(P, F, dP):
    S = P @ dP.T
    S = S + S.T
    g = np.diag(S)
    KS = g[:, None] + g[None, :] - 2.0 * S
    np.fill_diagonal(KS, 0.0)
    return 2.0 * (_laplacian(KS) @ P) + 2.0 * (_laplacian(F) @ dP)


def hessian_apply(x, dx, ctx):
    """Hessian-vector product ``H(dx)`` in the context's coordinates.

    For ``P``: ``2 K*(K(P dP^T + dP P^T)) P + 2 K*(F) dP``.
    """
    P = ctx.to_P(x)
    dx = ctx.check(dx, "dx")
    F = residual(P, ctx.instance.D)
    if ctx.formulation is Formulation.FULL_P:
        dP = dx
    elif ctx.formulation is Formulation.REDUCED_L:
        dP = ctx.V @ dx
    else:
        dP = ctx.V @ ltriag(dx, ctx.n, ctx.d)
    return ctx.pull_back(_full_hessian_apply(P, F, dP))


def _congruence_V(M, V, d):
    # (I_d kron V)^T M (I_d kron V) with column-major ordering
    n = V.shape[0]
    B = M.reshape(d, n, d, n)
    B = np.einsum("ip,aibj,jq->apbq", V, B, V, optimize=True)
    m = n - 1
    return B.reshape(d * m, d * m)


def _reduce(M, ctx):
    if ctx.formulation is Formulation.FULL_P:
        return M
    ML = _congruence_V(M, ctx.V, ctx.d)
    if ctx.formulation is Formulation.REDUCED_L:
        return ML
    flat = tri_index(ctx.n, ctx.d)[2]
    return ML[np.ix_(flat, flat)]


def hessian_dense(x, ctx):
    """Assemble :class:`HessianParts` at ``x``.

    Raises :class:`CapacityError` when the dense matrix would exceed
    ``MAX_DENSE_COLUMNS`` columns; use :func:`hessian_apply` instead.
    """
    if ctx.size > MAX_DENSE_COLUMNS:
        raise CapacityError(
            f"dense Hessian with {ctx.size} columns exceeds the guard of {MAX_DENSE_COLUMNS}; "
            "use hessian_apply (matrix-free) instead"
        )
    P = ctx.to_P(x)
    F = residual(P, ctx.instance.D)
    H1 = _reduce(gauss_newton_blocks(P), ctx)
    H2 = _reduce(np.kron(np.eye(ctx.d), _laplacian(F)), ctx)
    H1 = 0.5 * (H1 + H1.T)
    H2 = 0.5 * (H2 + H2.T)
    return HessianParts(F, H1, H2, 4.0 * H1 + 2.0 * H2)


def hessian(x, ctx):
    return hessian_dense(x, ctx).H


def smallest_eigenvalue(H):
    return float(np.linalg.eigvalsh(H)[0])


def h2_pairing(P, instance):
    """``(vec(Pbar)^T H2 vec(Pbar), -||F(P)||^2)``.

    The two numbers coincide at every stationary point; away from one they
    differ by ``0.5 * <P, grad f(P)>`` (see :func:`h2_pairing_bound`).
    """
    if instance.P_bar is None:
        raise DomainError("h2_pairing needs the generator configuration P_bar")
    P = np.asarray(P, dtype=float)
    if P.shape != (instance.n, instance.d):
        raise DimensionError(f"P has shape {P.shape}, expected {(instance.n, instance.d)}")
    F = residual(P, instance.D)
    Pb = instance.P_bar
    lhs = float(np.sum(Pb * (_laplacian(F) @ Pb)))
    return lhs, -float(np.sum(F * F))


def h2_pairing_bound(P, grad_norm):
    """Bound on the gap between the two :func:`h2_pairing` values."""
    return 0.5 * float(np.linalg.norm(P)) * float(grad_norm)
