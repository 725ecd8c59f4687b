"""Existence certificates for strict local non-global minimisers.

Given a numerically stationary point ``x~`` with a positive definite Hessian
and a positive objective, the certificate checks, on a ball ``B_r(x~)``:

1. a Lipschitz constant ``gamma`` of the Hessian, so that
   ``lambda_min(H(x)) >= lambda_min(H(x~)) - gamma * r`` on the ball;
2. that the objective stays above a floor ``fbar > 0`` (convexity on the ball);
3. the Kantorovich conditions ``alpha = beta * gamma * eta <= 1/2`` and
   ``r0 <= r`` for Newton's method on the gradient.

Together these prove that a strict local minimiser with value ``> fbar``
exists within ``r0`` of ``x~``. Everything is floating point; inequalities
carry a multiplicative slack on ``gamma`` and an additive slack on
eigenvalues instead of directed rounding.

Hessian Lipschitz bound
-----------------------
For ``x, y`` in ``B_r(x~)`` and points ``p~_i`` of the lifted centre,

    ||H(x) - H(y)|| <= 24 sqrt(2) (S + 2 n sqrt(n) r) ||x - y||,
    S = sum over ordered pairs (i, j) of ||p~_i - p~_j||.

The quantity ``48 sqrt(2) r (S + 2 n sqrt(n) r)`` (see
:func:`hessian_variation_bound`) is the same estimate with ``||x - y||``
replaced by the ball diameter ``2 r``; it bounds ``||H(x) - H(y)||`` itself
and is *not* a Lipschitz constant.
"""

from dataclasses import asdict, dataclass, field
import math
from typing import List, Optional

import numpy as np

from . import __version__
from .edm_core import ltriag
from .errors import DomainError
from .kernels import pair_distance_sum
from .stress import EvalContext, Formulation, hessian, value_and_gradient

SAFETY_FACTOR = 1.1
EIG_SLACK = 1e-9
ROW_MARGIN = 10.0

CERTIFIED = "CERTIFIED"
FAILED = "FAILED"


def hessian_variation_bound(pair_sum, n, r):
    """``48 sqrt(2) r (S + 2 n sqrt(n) r)``: bound on ``||H(x) - H(y)||`` over ``B_r``."""
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r}")
    return 48.0 * math.sqrt(2.0) * r * (pair_sum + 2.0 * n * math.sqrt(n) * r)


def lipschitz_from_pair_sum(pair_sum, n, r, safety=SAFETY_FACTOR):
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r}")
    return safety * 24.0 * math.sqrt(2.0) * (pair_sum + 2.0 * n * math.sqrt(n) * r)


def lipschitz_gamma(x, ctx, r, safety=SAFETY_FACTOR):
    """Hessian Lipschitz constant on ``B_r(x)``, times ``safety``.

    Valid for ``f_L`` and ``f_ell`` alike: both Hessians are congruences of
    the ``P``-Hessian by isometric embeddings.
    """
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r}")
    return lipschitz_from_pair_sum(pair_distance_sum(ctx.to_P(x)), ctx.n, r, safety)


def hessian_floor(lam_min, gamma, r):
    """Lower bound ``lam_min - gamma * r`` for the smallest Hessian eigenvalue on ``B_r``."""
    return lam_min - gamma * r


def objective_floor_radius(f, fbar, grad_norm, r):
    """Radius ``min(r, (f - fbar) / ||g||)`` on which ``f`` stays above ``fbar``.

    Valid provided the Hessian is positive definite on ``B_r``.
    """
    if not f > fbar:
        raise DomainError(f"need f > fbar, got f={f!r}, fbar={fbar!r}")
    if grad_norm == 0:
        return r
    return min(r, (f - fbar) / grad_norm)


@dataclass
class KantorovichParams:
    beta: float
    eta: float
    gamma_r: float
    alpha: float
    r0: Optional[float]
    r1_unclamped: Optional[float]


def kantorovich_quantities(beta, eta, gamma):
    """Scalar part of :func:`kantorovich_params` (``beta`` and ``eta`` given)."""
    gamma_r = beta * gamma
    alpha = gamma_r * eta
    if alpha > 0.5:
        return KantorovichParams(beta, eta, gamma_r, alpha, None, None)
    disc = math.sqrt(max(1.0 - 2.0 * alpha, 0.0))
    if gamma_r == 0:
        # linear gradient: Newton lands exactly, no uniqueness radius
        return KantorovichParams(beta, eta, gamma_r, alpha, eta, math.inf)
    # 1 - sqrt(1 - 2a) = 2a / (1 + sqrt(1 - 2a)) avoids cancellation
    r0 = 2.0 * alpha / (1.0 + disc) / gamma_r
    r1 = (1.0 + disc) / gamma_r
    return KantorovichParams(beta, eta, gamma_r, alpha, r0, r1)


def kantorovich_params(H, g, gamma, eig_slack=0.0):
    """``beta = ||H^-1||_2``, ``eta = ||H^-1 g||`` and the derived radii.

    ``H`` must be symmetric positive definite (after subtracting
    ``eig_slack``). ``r0`` and ``r1_unclamped`` are ``None`` when
    ``alpha > 1/2``.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float).ravel(order="F")
    w, Q = np.linalg.eigh(0.5 * (H + H.T))
    lam = w[0] - eig_slack
    if not lam > 0:
        raise DomainError(f"Hessian is not positive definite (lambda_min = {w[0]:.3e})")
    beta = 1.0 / lam
    eta = float(np.linalg.norm(Q @ ((Q.T @ g) / w)))
    return kantorovich_quantities(beta, eta, gamma)


@dataclass
class Certificate:
    formulation: str
    n: int
    d: int
    candidate: list
    r: float
    gamma: float
    gamma_variation: float
    pair_sum: float
    safety_factor: float
    eig_slack: float
    eig_slack_abs: float
    lambda_min: float
    lambda_floor: float
    f: float
    fbar: float
    grad_norm: float
    floor_radius: Optional[float]
    beta: Optional[float]
    eta: Optional[float]
    gamma_r: Optional[float]
    alpha: Optional[float]
    r0: Optional[float]
    r1: Optional[float]
    r1_unclamped: Optional[float]
    first_rows_sigma_min: Optional[float]
    newton_bound_printed: List[float] = field(default_factory=list)
    newton_bound_classical: List[float] = field(default_factory=list)
    verdict: str = FAILED
    reasons: List[str] = field(default_factory=list)
    tool_version: str = __version__
    instance_hash: str = ""

    @property
    def certified(self):
        return self.verdict == CERTIFIED

    def point(self):
        x = np.asarray(self.candidate, dtype=float)
        return x

    def to_dict(self):
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, float) and not math.isfinite(v):
                out[k] = None if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        for k, v in data.items():
            if v == "inf":
                data[k] = math.inf
            elif v == "-inf":
                data[k] = -math.inf
        return cls(**data)


def newton_error_bounds(alpha, eta, steps=6):
    """Two readings of the Newton error bound ``||x_k - x*||``.

    Returns ``(printed, classical)`` with ``(2a)^(2k) eta / a`` and
    ``(2a)^(2^k) eta / a`` for ``k = 0..steps-1``.
    """
    if alpha is None or alpha <= 0:
        z = [0.0] * steps
        return z, list(z)
    printed = [(2 * alpha) ** (2 * k) * eta / alpha for k in range(steps)]
    classical = [(2 * alpha) ** (2**k) * eta / alpha for k in range(steps)]
    return printed, classical


def _check_formulation(ctx):
    if ctx.formulation is Formulation.FULL_P:
        raise DomainError("certification works on L (d = 1) or ell (d >= 2), not on P")
    if ctx.formulation is Formulation.REDUCED_L and ctx.d >= 2:
        raise DomainError(
            "f_L cannot be certified for d >= 2: its local minimisers are non-isolated "
            "(rotation orbits), so the Hessian is singular; use the triangular formulation"
        )


def certify_from_scalars(lam_min, gamma, r, f, fbar, grad_norm, beta, eta,
                         eig_slack=0.0, first_rows_sigma_min=None, d=1):
    """Decide a certificate from precomputed scalars.

    Returns a dict with ``lambda_floor``, ``floor_radius``, the Kantorovich
    quantities, ``r1``, ``verdict`` and ``reasons``. ``beta`` and ``eta`` may
    be ``None`` when the Hessian at the candidate is not positive definite.
    """
    reasons = []
    lam_floor = hessian_floor(lam_min, gamma, r) - eig_slack
    if not fbar > 0:
        reasons.append(f"objective floor fbar = {fbar!r} is not positive")
    floor_r = None
    if f > fbar:
        floor_r = objective_floor_radius(f, fbar, grad_norm, r)
        if floor_r < r:
            reasons.append(f"objective floor radius {floor_r:.3e} < r = {r:.3e}")
    else:
        reasons.append(f"f = {f:.6e} does not exceed fbar = {fbar:.6e}")
    if not lam_floor > 0:
        reasons.append(f"Hessian floor {lam_floor:.6e} <= 0 on B_r")
    kp = None
    if beta is None or not beta > 0:
        reasons.append(f"Hessian at the candidate is not positive definite (lambda_min = {lam_min:.3e})")
    else:
        kp = kantorovich_quantities(beta, eta, gamma)
        if kp.alpha > 0.5:
            reasons.append(f"alpha = {kp.alpha:.3e} > 1/2")
        elif kp.r0 > r:
            reasons.append(f"r0 = {kp.r0:.3e} > r = {r:.3e}")
    r1 = None
    if kp is not None and kp.r1_unclamped is not None:
        r1 = min(r, kp.r1_unclamped)
    if d >= 2:
        need = ROW_MARGIN * (r1 if r1 is not None else r)
        if first_rows_sigma_min is None or not first_rows_sigma_min >= need:
            reasons.append(
                f"first {d} rows nearly dependent: sigma_min = {first_rows_sigma_min} < {need:.3e}"
            )
    return {
        "lambda_floor": lam_floor,
        "floor_radius": floor_r,
        "beta": kp.beta if kp else None,
        "eta": kp.eta if kp else None,
        "gamma_r": kp.gamma_r if kp else None,
        "alpha": kp.alpha if kp else None,
        "r0": kp.r0 if kp else None,
        "r1": r1,
        "r1_unclamped": kp.r1_unclamped if kp else None,
        "verdict": CERTIFIED if not reasons else FAILED,
        "reasons": reasons,
    }


def certify_lngm(x, ctx, r=1e-3, fbar=None, safety=SAFETY_FACTOR, eig_slack=EIG_SLACK):
    """Build a :class:`Certificate` for the candidate ``x``.

    ``ctx`` must be ``REDUCED_L`` for ``d = 1`` and ``TRIANGULAR_ELL`` for
    ``d >= 2``. ``fbar`` defaults to ``f(x) / 2``. The verdict is
    ``CERTIFIED`` only when every condition holds; ``reasons`` lists the
    ones that did not. ``eig_slack`` is relative: the absolute slack
    subtracted from eigenvalues is ``eig_slack * (1 + ||H||)``.
    """
    _check_formulation(ctx)
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r}")
    x = ctx.check(x)
    n, d = ctx.n, ctx.d
    f, g = value_and_gradient(x, ctx)
    gnorm = float(np.linalg.norm(g))
    if fbar is None:
        fbar = 0.5 * f
    H = hessian(x, ctx)
    w = np.linalg.eigvalsh(H)
    slack = eig_slack * (1.0 + float(np.abs(w).max()))
    lam = float(w[0])
    psum = pair_distance_sum(ctx.to_P(x))
    gamma = lipschitz_from_pair_sum(psum, n, r, safety)
    beta = eta = None
    if lam - slack > 0:
        kp = kantorovich_params(H, g, gamma, eig_slack=slack)
        beta, eta = kp.beta, kp.eta
    sig = None
    if d >= 2:
        top = ltriag(x, n, d)[:d, :]
        sig = float(np.linalg.svd(top, compute_uv=False).min()) if top.shape[0] == d else 0.0
    out = certify_from_scalars(lam, gamma, r, f, fbar, gnorm, beta, eta,
                               eig_slack=slack, first_rows_sigma_min=sig, d=d)
    printed, classical = newton_error_bounds(out["alpha"], out["eta"] or 0.0)
    return Certificate(
        formulation=ctx.formulation.value,
        n=n,
        d=d,
        candidate=np.asarray(x).tolist(),
        r=float(r),
        gamma=gamma,
        gamma_variation=hessian_variation_bound(psum, n, r),
        pair_sum=psum,
        safety_factor=float(safety),
        eig_slack=float(eig_slack),
        eig_slack_abs=slack,
        lambda_min=lam,
        f=f,
        fbar=float(fbar),
        grad_norm=gnorm,
        first_rows_sigma_min=sig,
        newton_bound_printed=printed,
        newton_bound_classical=classical,
        instance_hash=ctx.instance.digest(),
        **out,
    )


def suggest_radius(x, ctx, safety=SAFETY_FACTOR):
    """Radius at which the Hessian floor keeps half of ``lambda_min``.

    Solves ``gamma(r) * r = lambda_min / 2`` for the (quadratic in ``r``)
    Lipschitz bound; returns ``None`` if the Hessian is not positive definite.
    """
    x = ctx.check(x)
    lam = float(np.linalg.eigvalsh(hessian(x, ctx))[0])
    if not lam > 0:
        return None
    n = ctx.n
    c = safety * 24.0 * math.sqrt(2.0)
    a = c * 2.0 * n * math.sqrt(n)
    b = c * pair_distance_sum(ctx.to_P(x))
    # a r^2 + b r - lam/2 = 0
    return (2.0 * (0.5 * lam)) / (b + math.sqrt(b * b + 4.0 * a * 0.5 * lam))


def verify_certificate(cert, instance):
    """Recompute ``cert`` from its stored candidate; returns ``(ok, fresh)``.

    ``ok`` is true when the instance hash and the verdict both match.
    """
    if isinstance(cert, dict):
        cert = Certificate.from_dict(cert)
    if cert.instance_hash and cert.instance_hash != instance.digest():
        return False, None
    ctx = EvalContext.make(instance, cert.formulation)
    fresh = certify_lngm(
        cert.point(), ctx, r=cert.r, fbar=cert.fbar, safety=cert.safety_factor,
        eig_slack=cert.eig_slack,
    )
    return fresh.verdict == cert.verdict, fresh
