"""Second-order stationary points of the smooth stress.

The search runs a trust-region Newton method whose subproblem is solved
exactly from an eigendecomposition of the dense Hessian (fine at desk scale,
and the smallest eigenvalue is needed for classification anyway).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import enum
import os
from typing import List, Optional

import numpy as np
from scipy.linalg import orthogonal_procrustes
from scipy.optimize import brentq

from .edm_core import center, reduce_to_triangular
from .errors import DomainError, NumericalError, PreconditionError, SingularHessianError
from .stress import (
    EvalContext,
    Formulation,
    gradient,
    hessian,
    hessian_apply,
    residual,
    value_and_gradient,
)

GLOBAL_F_TOL = 1e-8
MAXIMIZER_TOL = 1e-8
RANK_TOL = 1e-8
SINGULAR_COND = 1e14


class Classification(str, enum.Enum):
    GLOBAL = "GLOBAL"
    LNGM_CANDIDATE = "LNGM_CANDIDATE"
    SADDLE = "SADDLE"
    MAXIMIZER = "MAXIMIZER"
    UNDETERMINED = "UNDETERMINED"


@dataclass(frozen=True)
class SolveOptions:
    """Trust-region settings.

    ``g_tol`` and ``lam_tol`` default (``None``) to the relative rules
    ``1e-8 * (1 + f)`` and ``1e-8 * (1 + ||H||)``.
    """

    max_iters: int = 500
    g_tol: Optional[float] = None
    lam_tol: Optional[float] = None
    radius0: Optional[float] = None
    max_radius: Optional[float] = None
    eta_accept: float = 0.1
    eta_shrink: float = 0.25
    eta_expand: float = 0.75
    seed: int = 0

    def __post_init__(self):
        for name in ("g_tol", "lam_tol", "radius0", "max_radius"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise DomainError(f"{name} must be positive, got {v}")
        if not 0 < self.eta_accept < 1 or not 0 < self.eta_shrink < 1 or not 0 < self.eta_expand < 1:
            raise DomainError("acceptance thresholds must lie in (0, 1)")
        if not self.eta_accept <= self.eta_shrink <= self.eta_expand:
            raise DomainError("need eta_accept <= eta_shrink <= eta_expand")
        if self.max_iters < 0:
            raise DomainError("max_iters must be >= 0")

    def grad_tol(self, f):
        return self.g_tol if self.g_tol is not None else 1e-8 * (1.0 + abs(f))

    def curv_tol(self, h_norm):
        return self.lam_tol if self.lam_tol is not None else 1e-8 * (1.0 + h_norm)


@dataclass
class SolveReport:
    x: np.ndarray
    formulation: Formulation
    f: float
    grad_norm: float
    lambda_min: float
    lambda_min_search: float
    class_formulation: Formulation
    iterations: int
    converged: bool
    classification: Classification
    trace: list = field(default_factory=list)
    start_index: int = 0
    seed: Optional[int] = None
    message: str = ""

    def to_dict(self, trace=False):
        out = {
            "start_index": self.start_index,
            "seed": self.seed,
            "formulation": self.formulation.value,
            "class_formulation": self.class_formulation.value,
            "classification": self.classification.value,
            "converged": self.converged,
            "iterations": self.iterations,
            "f": self.f,
            "grad_norm": self.grad_norm,
            "lambda_min": self.lambda_min,
            "lambda_min_search": self.lambda_min_search,
            "message": self.message,
            "x": np.asarray(self.x).tolist(),
        }
        if trace:
            out["trace"] = [list(t) for t in self.trace]
        return out


# --------------------------------------------------------------------------
# trust-region subproblem


def _flat(x):
    return np.asarray(x).ravel(order="F")


def _unflat(v, shape):
    return v.reshape(shape, order="F")


def solve_tr_subproblem(g, w, Q, radius):
    """Exact minimiser of ``g.s + s.H.s/2`` over ``||s|| <= radius``.

    ``w, Q`` is the eigendecomposition of ``H`` (ascending). Returns the
    step and whether it lies on the boundary.
    """
    gt = Q.T @ g
    lam1 = w[0]
    if lam1 > 0:
        s = -gt / w
        if np.linalg.norm(s) <= radius:
            return Q @ s, False
    lo = max(0.0, -lam1)
    gnorm = np.linalg.norm(g)

    def phi(mu):
        return np.linalg.norm(gt / (w + mu)) - radius

    start = lo + 1e-12 * max(1.0, abs(lo)) + 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        p0 = phi(start)
    if not np.isfinite(p0) or p0 > 0:
        hi = lo + gnorm / radius + 1e-300
        while phi(hi) > 0:
            hi = 2.0 * hi + 1e-300
        mu = brentq(phi, start, hi, xtol=1e-15 * max(1.0, hi), rtol=1e-14, maxiter=200)
        return Q @ (-gt / (w + mu)), True
    # hard case: gradient has (numerically) no component on the lowest eigenspace
    denom = w + lo
    keep = denom > 1e-12 * max(1.0, abs(lo))
    st = np.zeros_like(gt)
    st[keep] = -gt[keep] / denom[keep]
    tau = np.sqrt(max(radius**2 - st @ st, 0.0))
    st[0] += tau
    return Q @ st, True


# --------------------------------------------------------------------------
# classification


def classification_coordinates(x, ctx):
    """Context and point in which to judge second-order optimality.

    ``f_L`` for ``d = 1``; ``f_ell`` (after rotating to triangular form) for
    ``d >= 2``, where rotation orbits make the ``f_L`` Hessian singular.
    """
    P = ctx.to_P(x)
    L = ctx.V.T @ P
    if ctx.d == 1:
        return ctx.with_formulation(Formulation.REDUCED_L), L
    return ctx.with_formulation(Formulation.TRIANGULAR_ELL), reduce_to_triangular(L).ell


def classify_stationary(f, grad_norm, lambda_min, edm_norm, ctx, g_tol, lam_tol):
    """Label a (numerically) stationary point.

    Raises :class:`PreconditionError` when ``grad_norm > g_tol``.
    """
    if grad_norm > g_tol:
        raise PreconditionError(f"point is not stationary: |g| = {grad_norm:.3e} > g_tol = {g_tol:.3e}")
    dn2 = ctx.instance.d_norm_sq
    if f <= GLOBAL_F_TOL * (1.0 + dn2):
        return Classification.GLOBAL
    if dn2 > 0 and edm_norm <= MAXIMIZER_TOL * (1.0 + np.sqrt(dn2)):
        return Classification.MAXIMIZER
    if lambda_min > lam_tol:
        return Classification.LNGM_CANDIDATE
    if lambda_min < -lam_tol:
        return Classification.SADDLE
    return Classification.UNDETERMINED


def assess_point(x, ctx, opts=None):
    """Evaluate and classify ``x``; returns a dict of the scalars used."""
    opts = opts or SolveOptions()
    cctx, xc = classification_coordinates(x, ctx)
    f, g = value_and_gradient(xc, cctx)
    H = hessian(xc, cctx)
    w = np.linalg.eigvalsh(H)
    gn = float(np.linalg.norm(g))
    g_tol = opts.grad_tol(f)
    lam_tol = opts.curv_tol(float(np.abs(w).max()))
    P = ctx.to_P(x)
    edm_norm = float(np.linalg.norm(residual(P, ctx.instance.D) + ctx.instance.D))
    cls = Classification.UNDETERMINED
    if gn <= g_tol:
        cls = classify_stationary(f, gn, float(w[0]), edm_norm, ctx, g_tol, lam_tol)
    return {
        "formulation": cctx.formulation,
        "f": f,
        "grad_norm": gn,
        "lambda_min": float(w[0]),
        "g_tol": g_tol,
        "lam_tol": lam_tol,
        "classification": cls,
    }


# --------------------------------------------------------------------------
# trust-region Newton


def trust_region_minimize(x0, ctx, opts=None, start_index=0):
    """Minimise the stress from ``x0`` until a second-order point is found.

    Stops when ``||g|| <= g_tol`` and ``lambda_min(H) >= -lam_tol`` in the
    search formulation, or after ``opts.max_iters`` iterations. Accepted
    steps strictly decrease ``f``.
    """
    opts = opts or SolveOptions()
    shape = ctx.shape
    x = _flat(ctx.check(x0, "x0")).astype(float).copy()
    f, g = value_and_gradient(_unflat(x, shape), ctx)
    g = _flat(g)
    radius = opts.radius0 if opts.radius0 is not None else 0.1 * (1.0 + np.linalg.norm(x))
    max_radius = opts.max_radius if opts.max_radius is not None else 1e3 * (1.0 + np.linalg.norm(x))
    trace = []
    converged = False
    it = 0
    lam_min = np.nan
    need_eig = True
    while True:
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite objective at iteration {it}", trace)
        if need_eig:
            H = hessian(_unflat(x, shape), ctx)
            if not np.all(np.isfinite(H)):
                raise NumericalError(f"non-finite Hessian at iteration {it}", trace)
            w, Q = np.linalg.eigh(H)
            lam_min = float(w[0])
            need_eig = False
        gn = float(np.linalg.norm(g))
        trace.append((f, gn, float(radius)))
        if gn <= opts.grad_tol(f) and lam_min >= -opts.curv_tol(float(np.abs(w).max())):
            converged = True
            break
        if it >= opts.max_iters:
            break
        it += 1
        s, on_boundary = solve_tr_subproblem(g, w, Q, radius)
        pred = -(g @ s + 0.5 * s @ (H @ s))
        x_new = x + s
        f_new, g_new = value_and_gradient(_unflat(x_new, shape), ctx)
        if not np.isfinite(f_new):
            radius *= 0.25
            continue
        actual = f - f_new
        rho = actual / pred if pred > 0 else -np.inf
        snorm = np.linalg.norm(s)
        if rho < opts.eta_shrink:
            radius = 0.25 * snorm
        elif rho > opts.eta_expand and on_boundary:
            radius = min(2.0 * radius, max_radius)
        if rho > opts.eta_accept and f_new < f:
            x, f, g = x_new, f_new, _flat(g_new)
            need_eig = True
        elif radius < 1e-300 or snorm == 0.0:
            break
    x_out = _unflat(x, shape)
    info = assess_point(x_out, ctx, opts)
    cls = info["classification"] if converged else Classification.UNDETERMINED
    msg = "second-order point reached" if converged else "iteration limit or stagnation"
    return SolveReport(
        x=x_out,
        formulation=ctx.formulation,
        f=float(f),
        grad_norm=float(np.linalg.norm(g)),
        lambda_min=info["lambda_min"],
        lambda_min_search=lam_min,
        class_formulation=info["formulation"],
        iterations=it,
        converged=converged,
        classification=cls,
        trace=trace,
        start_index=start_index,
        seed=opts.seed,
        message=msg,
    )


# --------------------------------------------------------------------------
# plain Newton


def newton_iterate(x0, ctx, steps):
    """``steps`` pure Newton steps from ``x0``; returns ``[x0, x1, ...]``.

    Raises :class:`SingularHessianError` when the Hessian condition number
    exceeds ``1e14`` at some iterate.
    """
    shape = ctx.shape
    x = _flat(ctx.check(x0, "x0")).astype(float)
    seq = [_unflat(x.copy(), shape)]
    for j in range(int(steps)):
        xs = _unflat(x, shape)
        g = _flat(gradient(xs, ctx))
        if not np.any(g):
            seq.append(_unflat(x.copy(), shape))
            continue
        H = hessian(xs, ctx)
        w = np.linalg.eigvalsh(H)
        aw = np.abs(w)
        cond = aw.max() / aw.min() if aw.min() > 0 else np.inf
        if not cond <= SINGULAR_COND:
            raise SingularHessianError(
                f"Hessian singular at iterate {j} (condition estimate {cond:.3e})", iterate=j
            )
        x = x - np.linalg.solve(H, g)
        seq.append(_unflat(x.copy(), shape))
    return seq


# --------------------------------------------------------------------------
# negative curvature witness


@dataclass
class Witness:
    """Descent direction ``a w^T`` at a rank-deficient stationary point.

    ``curvature`` is ``<H(dL), dL>`` from the Hessian action;
    ``h2_value = ||w||^2 a^T K*(F) a`` is the residual-part quadratic form;
    with the Gauss-Newton part vanishing, ``curvature == 2 * h2_value``.
    """

    a: np.ndarray
    w: np.ndarray
    direction_P: np.ndarray
    direction_L: np.ndarray
    curvature: float
    h2_value: float
    j_norm: float

    @property
    def closed_form_curvature(self):
        return 2.0 * self.h2_value


def negative_curvature_witness(L, ctx, g_tol=None):
    """Negative curvature direction at a non-global stationary ``L`` with rank < d."""
    if ctx.formulation is not Formulation.REDUCED_L:
        ctx = ctx.with_formulation(Formulation.REDUCED_L)
    L = ctx.check(L, "L")
    d = ctx.d
    f, g = value_and_gradient(L, ctx)
    gn = float(np.linalg.norm(g))
    tol = g_tol if g_tol is not None else 1e-8 * (1.0 + f)
    if gn > tol:
        raise PreconditionError(f"L is not stationary: |g| = {gn:.3e} > {tol:.3e}")
    if f <= GLOBAL_F_TOL * (1.0 + ctx.instance.d_norm_sq):
        raise PreconditionError("L is a global minimiser; no negative curvature exists")
    _, sv, Vt = np.linalg.svd(L, full_matrices=True)
    sv_full = np.zeros(d)
    sv_full[: len(sv)] = sv
    smax = sv_full.max()
    if sv_full.min() > RANK_TOL * smax:
        raise PreconditionError(f"rank(L) = d: smallest singular value {sv_full.min():.3e}")
    w = Vt[-1]
    P = ctx.V @ L
    F = residual(P, ctx.instance.D)
    lap = 2.0 * (np.diag(F.sum(axis=1)) - F)
    evals, evecs = np.linalg.eigh(lap)
    if evals[0] >= 0:
        raise NumericalError(f"K*(F) has no negative eigenvalue (min {evals[0]:.3e})")
    a = evecs[:, 0]
    dP = np.outer(a, w)
    dL = ctx.V.T @ dP
    curv = float(np.sum(hessian_apply(L, dL, ctx) * dL))
    S = P @ dP.T
    S = S + S.T
    gS = np.diag(S)
    KS = gS[:, None] + gS[None, :] - 2.0 * S
    np.fill_diagonal(KS, 0.0)
    h2 = float(w @ w) * float(a @ lap @ a)
    return Witness(a, w, dP, dL, curv, h2, float(np.linalg.norm(KS)))


# --------------------------------------------------------------------------
# multi-start


def start_scale(instance):
    """RMS pairwise distance of the data (1 when all distances vanish)."""
    n = instance.n
    off = instance.D.sum() / (n * (n - 1))
    return float(np.sqrt(off)) if off > 0 else 1.0


def _aligned(x, ctx):
    if ctx.formulation is Formulation.FULL_P:
        return center(x)
    return x


def _same_point(x, y, ctx, tol):
    if ctx.formulation is Formulation.TRIANGULAR_ELL:
        return np.linalg.norm(x - y) <= tol
    a, b = _aligned(x, ctx), _aligned(y, ctx)
    R, _ = orthogonal_procrustes(a, b)
    return np.linalg.norm(a @ R - b) <= tol


def _thread_count():
    try:
        return max(1, int(os.environ.get("EDMLNGM_THREADS", "1")))
    except ValueError:
        return 1


def multi_start_scan(instance, formulation, k_starts, opts=None, dedup=True, dedup_tol=1e-6, workers=None):
    """``k_starts`` trust-region runs from scaled standard-normal starts.

    Start ``i`` draws from its own stream spawned off ``opts.seed``, so the
    result does not depend on ``workers``. Reports come back ordered by start
    index. A run that raises is reported as ``UNDETERMINED`` with the error
    text in ``message``. With ``dedup`` later reports whose point matches an
    earlier one (after centring and orthogonal alignment) are dropped.
    """
    if k_starts < 1:
        raise DomainError("k_starts must be >= 1")
    opts = opts or SolveOptions()
    ctx = EvalContext.make(instance, formulation)
    scale = start_scale(instance)
    seqs = np.random.SeedSequence(opts.seed).spawn(k_starts)

    def run(i):
        rng = np.random.default_rng(seqs[i])
        x0 = scale * rng.standard_normal(ctx.shape)
        sub = replace(opts, seed=int(seqs[i].generate_state(1)[0]))
        try:
            return trust_region_minimize(x0, ctx, sub, start_index=i)
        except NumericalError as exc:
            return SolveReport(
                x=x0, formulation=ctx.formulation, f=float("nan"), grad_norm=float("nan"),
                lambda_min=float("nan"), lambda_min_search=float("nan"),
                class_formulation=ctx.formulation, iterations=0, converged=False,
                classification=Classification.UNDETERMINED, trace=list(exc.trace),
                start_index=i, seed=sub.seed, message=f"error: {exc}",
            )

    workers = workers or _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, range(k_starts)))
    else:
        reports = [run(i) for i in range(k_starts)]
    if not dedup:
        return reports
    kept: List[SolveReport] = []
    for rep in reports:
        if rep.converged and any(
            k.converged and _same_point(rep.x, k.x, ctx, dedup_tol) for k in kept
        ):
            continue
        kept.append(rep)
    return kept


def summarize(reports):
    counts = {c.value: 0 for c in Classification}
    for r in reports:
        counts[r.classification.value] += 1
    return counts
