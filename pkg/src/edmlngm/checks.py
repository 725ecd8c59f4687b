"""Randomised property suites behind ``edmlngm check``.

Every suite uses fixed seeds and returns a list of :class:`CheckResult`.
"""

from dataclasses import dataclass
import time

import numpy as np

from .certifier import (
    certify_from_scalars,
    hessian_floor,
    hessian_variation_bound,
    kantorovich_quantities,
)
from .edm_core import (
    Instance,
    build_v,
    center,
    lindenstrauss,
    lindenstrauss_adjoint,
    ltriag,
    ltriag_adjoint,
    random_instance,
    reduce_to_triangular,
    tri_len,
)
from .pipeline import find_and_certify
from .solver import (
    Classification,
    SolveOptions,
    multi_start_scan,
    negative_curvature_witness,
    newton_iterate,
)
from .stress import (
    EvalContext,
    Formulation,
    gradient,
    h2_pairing,
    h2_pairing_bound,
    hessian,
    value,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float
    detail: str = ""

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"[{mark}] {self.name}: worst={self.worst:.3e} tol={self.tol:.3e}{extra}"


def _result(name, errs, tol, detail=""):
    worst = float(max(errs)) if len(errs) else 0.0
    return CheckResult(name, bool(worst <= tol), worst, tol, detail)


# --------------------------------------------------------------------------
# finite-difference oracle


def fd_gradient(fun, x, rel_step=1e-5):
    """Central differences, step ``rel_step * (1 + |x_k|)`` per coordinate."""
    flat = np.asarray(x, dtype=float).ravel(order="F")
    out = np.empty_like(flat)
    for k in range(flat.size):
        h = rel_step * (1.0 + abs(flat[k]))
        xp = flat.copy()
        xm = flat.copy()
        xp[k] += h
        xm[k] -= h
        out[k] = (fun(xp.reshape(np.shape(x), order="F")) - fun(xm.reshape(np.shape(x), order="F"))) / (2 * h)
    return out


def fd_jacobian(fun, x, rel_step=1e-5):
    flat = np.asarray(x, dtype=float).ravel(order="F")
    cols = []
    for k in range(flat.size):
        h = rel_step * (1.0 + abs(flat[k]))
        xp = flat.copy()
        xm = flat.copy()
        xp[k] += h
        xm[k] -= h
        gp = np.asarray(fun(xp.reshape(np.shape(x), order="F"))).ravel(order="F")
        gm = np.asarray(fun(xm.reshape(np.shape(x), order="F"))).ravel(order="F")
        cols.append((gp - gm) / (2 * h))
    return np.column_stack(cols)


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def random_case(seed, max_n=12, max_d=3):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_n + 1))
    d = int(rng.integers(1, max_d + 1))
    inst = random_instance(n, d, seed=seed + 10_000)
    return inst, rng


# --------------------------------------------------------------------------
# suites


def suite_calculus(seeds=range(100)):
    g_err, h_err = [], []
    for s in seeds:
        inst, rng = random_case(s)
        for form in Formulation:
            ctx = EvalContext.make(inst, form)
            x = rng.standard_normal(ctx.shape)
            g = gradient(x, ctx).ravel(order="F")
            g_err.append(_rel(g, fd_gradient(lambda y: value(y, ctx), x)))
            H = hessian(x, ctx)
            h_err.append(_rel(H, fd_jacobian(lambda y: gradient(y, ctx), x)))
    return [
        _result("gradient vs central differences", g_err, 1e-6, f"{len(g_err)} cases"),
        _result("Hessian vs differenced gradient", h_err, 1e-6, f"{len(h_err)} cases"),
    ]


def suite_structure(seeds=range(50)):
    adj_K, adj_T, rowsum, null_diag, psd = [], [], [], [], []
    for s in seeds:
        rng = np.random.default_rng(s)
        n = int(rng.integers(2, 13))
        d = int(rng.integers(1, 13))
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, n))
        G = A + A.T
        S = B + B.T
        lhs = np.sum(lindenstrauss(G) * S)
        rhs = np.sum(G * lindenstrauss_adjoint(S))
        adj_K.append(abs(lhs - rhs) / (1 + np.linalg.norm(G) * np.linalg.norm(S)))
        KS = lindenstrauss_adjoint(S)
        rowsum.append(np.abs(KS.sum(axis=1)).max() / (1 + np.abs(S).max()))
        null_diag.append(np.abs(lindenstrauss_adjoint(np.diag(rng.standard_normal(n)))).max())
        Spos = np.abs(S)
        psd.append(max(0.0, -np.linalg.eigvalsh(lindenstrauss_adjoint(Spos))[0]) / (1 + np.abs(Spos).max()))
        t = tri_len(n, d)
        xv = rng.standard_normal(t)
        L = rng.standard_normal((n - 1, d))
        adj_T.append(abs(np.sum(ltriag(xv, n, d) * L) - xv @ ltriag_adjoint(L)) / (1 + np.linalg.norm(xv) * np.linalg.norm(L)))
    v_err = []
    for n in range(2, 65):
        V = build_v(n)
        e = np.ones(n)
        v_err.append(max(
            np.abs(V.T @ V - np.eye(n - 1)).max(),
            np.abs(V.T @ e).max(),
            np.abs(V @ V.T - (np.eye(n) - np.outer(e, e) / n)).max(),
        ))
    return [
        _result("<K(G),S> = <G,K*(S)>", adj_K, 1e-12),
        _result("<ltriag(x),L> = <x,ltriag*(L)>", adj_T, 1e-12),
        _result("K*(S) rows sum to zero", rowsum, 1e-12),
        _result("K*(Diag(v)) = 0", null_diag, 1e-12),
        _result("S >= 0 gives K*(S) PSD", psd, 1e-10),
        _result("V basis invariants, n = 2..64", v_err, 1e-12),
    ]


def _random_rotation(rng, d):
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def suite_equivalence(seeds=range(100), solver_seeds=range(5)):
    inv, lifts = [], []
    for s in seeds:
        inst, rng = random_case(s)
        ctx = EvalContext.make(inst)
        P = rng.standard_normal((inst.n, inst.d))
        f0 = value(P, ctx)
        v = rng.standard_normal(inst.d)
        Q = _random_rotation(rng, inst.d)
        inv.append(abs(value(P + v[None, :], ctx) - f0) / (1 + f0))
        inv.append(abs(value(P @ Q, ctx) - f0) / (1 + f0))
        L = rng.standard_normal((inst.n - 1, inst.d))
        ctxL = ctx.with_formulation(Formulation.REDUCED_L)
        ctxE = ctx.with_formulation(Formulation.TRIANGULAR_ELL)
        fL = value(L, ctxL)
        ell = reduce_to_triangular(L).ell
        lifts.append(max(abs(value(ctx.V @ L, ctx) - fL), abs(value(ell, ctxE) - fL)) / (1 + fL))
    stat, spectra = [], []
    for s in solver_seeds:
        inst = random_instance(8, 2, seed=100 + s)
        reps = multi_start_scan(inst, Formulation.REDUCED_L, 4, SolveOptions(seed=s), dedup=False)
        ctxP = EvalContext.make(inst)
        ctxL = ctxP.with_formulation(Formulation.REDUCED_L)
        ctxE = ctxP.with_formulation(Formulation.TRIANGULAR_ELL)
        for r in reps:
            if not r.converged:
                continue
            L = r.x
            P = ctxP.V @ L
            gL = np.linalg.norm(gradient(L, ctxL))
            gP = np.linalg.norm(gradient(P, ctxP))
            ge = np.linalg.norm(gradient(reduce_to_triangular(L).ell, ctxE))
            tol = 1e-8 * (1 + r.f)
            stat.append(max(abs(gP - gL), max(gL, gP, ge) - tol if max(gL, gP, ge) > tol else 0.0) / (1 + r.f))
            wP = np.linalg.eigvalsh(hessian(P, ctxP))
            wL = np.linalg.eigvalsh(hessian(L, ctxL))
            # P-Hessian = L-Hessian plus d zero eigenvalues along translations
            zeros = np.argsort(np.abs(wP))[: inst.d]
            rest = np.sort(np.delete(wP, zeros))
            spectra.append(np.abs(rest - wL).max() / (1 + np.abs(wL).max()))
    return [
        _result("f invariant under translations/rotations", inv, 1e-12),
        _result("f(VL) = f_L(L) = f_ell(reduce(L))", lifts, 1e-10),
        _result("stationarity agrees across P, L, ell", stat, 1e-10, f"{len(stat)} solver outputs"),
        _result("eig(H_P) = eig(H_L) + d zeros", spectra, 1e-10),
    ]


def suite_theorems(starts=200):
    out = []
    errs, counts = [], 0
    for n, d in [(2, 1), (3, 2), (4, 3), (3, 3)]:
        inst = random_instance(n, d, seed=n * 10 + d)
        reps = multi_start_scan(inst, Formulation.REDUCED_L, starts, SolveOptions(seed=7), dedup=False)
        for r in reps:
            if r.converged:
                counts += 1
                errs.append(r.f / (1 + inst.d_norm_sq))
    out.append(_result("n <= d+1: second-order exits are global", errs, 1e-8, f"{counts} converged runs"))

    mx = []
    for s in range(5):
        inst = random_instance(6, 2, seed=200 + s)
        ctx = EvalContext.make(inst)
        P = np.tile(np.random.default_rng(s).standard_normal(2), (6, 1))
        H = hessian(P, ctx)
        w = np.linalg.eigvalsh(H)
        hn = np.abs(w).max()
        mx.append(w[-1] / hn if hn > 0 else np.inf)  # zero Hessian fails too
    out.append(_result("collapsed P: 0 != H <= 0", mx, 1e-8))

    pair = []
    inst = random_instance(50, 1, seed=0)
    reps = multi_start_scan(inst, Formulation.REDUCED_L, 20, SolveOptions(seed=0))
    ctxL = EvalContext.make(inst, Formulation.REDUCED_L)
    for r in reps:
        if r.converged and r.classification is not Classification.GLOBAL:
            L = newton_iterate(r.x, ctxL, 3)[-1]
            P = ctxL.V @ L
            gn = np.linalg.norm(gradient(L, ctxL))
            a, b = h2_pairing(P, inst)
            # excess over the stationarity bound, relative to ||F||^2
            pair.append((abs(a - b) - h2_pairing_bound(P, gn)) / (1.0 - b))
    out.append(_result("h2 pairing at non-global stationary points", pair or [np.inf], 1e-13,
                       f"{len(pair)} points"))

    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    inst = Instance.from_points(center(tri))
    wt = negative_curvature_witness(np.zeros((2, 2)), EvalContext.make(inst, Formulation.REDUCED_L))
    rel = abs(wt.curvature - wt.closed_form_curvature) / abs(wt.closed_form_curvature)
    out.append(_result("witness curvature = 2 ||w||^2 a'K*(F)a", [rel], 1e-10,
                       f"curvature = {wt.curvature:.6g}"))
    out.append(CheckResult("witness curvature < 0", wt.curvature < 0, wt.curvature, 0.0))
    return out


def suite_certifier():
    out = []
    kp = kantorovich_quantities(1.0e-4, 1.3e-5, 651.0)
    out.append(_result("alpha reproduces 8.7e-7 (5%)", [abs(kp.alpha - 8.7e-7) / 8.7e-7], 0.05))
    out.append(_result("r0 reproduces 1.3e-5 (5%)", [abs(kp.r0 - 1.3e-5) / 1.3e-5], 0.05))
    g = np.ceil(hessian_variation_bound(2127.9, 50, 1e-3))
    out.append(_result("variation bound rounds up to 145", [abs(g - 145.0)], 0.0))
    fl = hessian_floor(211.0, 145.0, 1e-3)
    out.append(CheckResult("211 - 145 r > 0", fl > 0, fl, 0.0))
    syn = certify_from_scalars(211.0, 145.0, 1e-3, 2.6e3, 1e3, 1.8e-3, 5.7e-4, 2.4e-6)
    out.append(CheckResult("synthetic scalar certificate", syn["verdict"] == "CERTIFIED", syn["alpha"], 0.5))

    t0 = time.perf_counter()
    inst = random_instance(50, 1, seed=0)
    _, pairs = find_and_certify(inst, 20, seed=0, r=1e-3)
    good = [p for p in pairs if p[3].certified]
    out.append(CheckResult("d=1, n=50 candidate certified at r=1e-3", bool(good), float(len(good)), 1.0,
                           f"{len(pairs)} candidates, {time.perf_counter() - t0:.1f}s"))
    errs = []
    for _, cctx, xc, cert in good:
        seq = newton_iterate(xc, cctx, 8)
        xs = seq[-1]
        errs.append(max(np.linalg.norm(xs - xc) - cert.r0 * (1 + 1e-6), 0.0))
    out.append(_result("Newton limit inside r0", errs or [np.inf], 0.0))
    return out


SUITES = {
    "calculus": suite_calculus,
    "structure": suite_structure,
    "equivalence": suite_equivalence,
    "theorems": suite_theorems,
    "certifier": suite_certifier,
}


def run_suite(name):
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name]()
