"""Command-line front end.

Exit codes: 0 success or CERTIFIED, 1 verification FAILED (or a failing
check suite), 2 usage / validation / I/O error, 3 numerical error.

The number of worker threads used by ``minimize`` is read from
``EDMLNGM_THREADS`` (default 1, fully deterministic).
"""

import argparse
import sys

import numpy as np

from . import __version__, io
from .certifier import Certificate, certify_lngm, suggest_radius, verify_certificate
from .edm_core import build_v, random_instance, reduce_to_triangular
from .errors import EDMError, NumericalError
from .pipeline import certification_point
from .solver import (
    Classification,
    SolveOptions,
    assess_point,
    classification_coordinates,
    multi_start_scan,
    newton_iterate,
    summarize,
    trust_region_minimize,
)
from .stress import EvalContext, Formulation, hessian

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive finite number, got {text}")
    return v


def _radius(text):
    return "auto" if text == "auto" else _positive_float(text)


def _formulation(text):
    try:
        return Formulation.parse(text)
    except EDMError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _say(args, text):
    if not args.quiet:
        print(text)


def _emit(obj, out):
    if out is None or out == "-":
        sys.stdout.write(io.dumps(obj))
    else:
        io.dump(obj, out)


# --------------------------------------------------------------------------
# subcommands


def cmd_gen(args):
    inst = random_instance(args.n, args.d, seed=args.seed)
    _emit(inst.to_dict(), args.out)
    return EXIT_OK


def cmd_minimize(args):
    inst = io.read_instance(args.instance)
    opts = SolveOptions(max_iters=args.max_iters, seed=args.seed)
    if args.start is not None:
        form, x0 = io.read_point(args.start, inst)
        rep = trust_region_minimize(x0, EvalContext.make(inst, form), opts)
        reports = [rep]
    else:
        reports = multi_start_scan(inst, args.formulation, args.starts, opts, dedup=not args.no_dedup)
    counts = summarize(reports)
    out = {
        "tool_version": __version__,
        "instance_hash": inst.digest(),
        "formulation": reports[0].formulation.value,
        "starts": 1 if args.start is not None else args.starts,
        "seed": args.seed,
        "summary": counts,
        "reports": [r.to_dict(trace=args.trace) for r in reports],
    }
    _emit(out, args.out)
    if args.trace_csv:
        for r in reports:
            io.write_trace_csv(r.trace, f"{args.trace_csv}_{r.start_index}.csv")
    print("summary: " + ", ".join(f"{k}={v}" for k, v in counts.items()), file=sys.stderr)
    return EXIT_OK


def _load_candidate(path, inst, index):
    """Return ``(formulation, x, from_report)`` from a point or report file."""
    data = io.load(path)
    if "reports" not in data:
        form, x = io.point_from_dict(data, inst)
        return form, x, False
    reps = data["reports"]
    if index is None:
        picks = [r for r in reps if r["classification"] == Classification.LNGM_CANDIDATE.value]
        if not picks:
            raise EDMError(f"{path} contains no {Classification.LNGM_CANDIDATE.value} report")
        rep = picks[0]
    else:
        if not 0 <= index < len(reps):
            raise EDMError(f"report index {index} out of range (0..{len(reps) - 1})")
        rep = reps[index]
    form, x = io.point_from_dict({"formulation": rep["formulation"], "data": rep["x"]}, inst)
    return form, x, True


def _default_decimals(d):
    return 6 if d == 1 else 8


def cmd_certify(args):
    inst = io.read_instance(args.instance)
    if args.verify:
        cert = Certificate.from_dict(io.load(args.verify))
        ok, fresh = verify_certificate(cert, inst)
        if fresh is None:
            print("verify: instance hash mismatch", file=sys.stderr)
            return EXIT_FAILED
        _say(args, f"verify: stored {cert.verdict}, recomputed {fresh.verdict}: "
                   f"{'consistent' if ok else 'MISMATCH'}")
        if args.out:
            io.dump(fresh.to_dict(), args.out)
        return EXIT_OK if ok and fresh.certified else EXIT_FAILED
    if args.point is None:
        raise EDMError("certify needs --point (or --verify CERT)")
    form, x, from_report = _load_candidate(args.point, inst, args.index)
    ctx = EvalContext.make(inst, form)
    decimals = args.round
    if decimals is None and from_report:
        decimals = _default_decimals(inst.d)
    if decimals is not None and decimals < 0:
        decimals = None
    cctx, xc = certification_point(x, ctx, decimals)
    r = suggest_radius(xc, cctx) if args.r == "auto" else args.r
    if r is None:
        r = 1e-3
    cert = certify_lngm(xc, cctx, r=r, fbar=args.fbar)
    _emit(cert.to_dict(), args.out)
    _say(args, f"{cert.verdict}: formulation={cert.formulation} r={cert.r:.3g} "
               f"alpha={cert.alpha if cert.alpha is None else format(cert.alpha, '.3g')} "
               f"lambda_floor={cert.lambda_floor:.4g}")
    for reason in cert.reasons:
        _say(args, f"  - {reason}")
    return EXIT_OK if cert.certified else EXIT_FAILED


def cmd_newton(args):
    inst = io.read_instance(args.instance)
    form, x, _ = _load_candidate(args.point, inst, args.index)
    ctx = EvalContext.make(inst, form)
    if args.to_certifiable:
        ctx, x = classification_coordinates(x, ctx)
    seq = newton_iterate(x, ctx, args.steps)
    steps = [float(np.linalg.norm(np.asarray(b) - np.asarray(a))) for a, b in zip(seq, seq[1:])]
    final = assess_point(seq[-1], ctx)
    out = io.point_to_dict(
        ctx.formulation, seq[-1],
        step_norms=steps,
        distance_to_start=float(np.linalg.norm(np.asarray(seq[-1]) - np.asarray(seq[0]))),
        f=final["f"], grad_norm=final["grad_norm"], lambda_min=final["lambda_min"],
        classification=final["classification"].value,
    )
    _emit(out, args.out)
    return EXIT_OK


def cmd_reduce(args):
    inst = io.read_instance(args.instance) if args.instance else None
    form, x = io.read_point(args.point, inst)
    if form is Formulation.FULL_P:
        x = build_v(x.shape[0]).T @ x
    elif form is Formulation.TRIANGULAR_ELL:
        raise EDMError("point is already in triangular coordinates")
    red = reduce_to_triangular(x)
    out = io.point_to_dict(
        Formulation.TRIANGULAR_ELL, red.ell, Q=red.Q, rank_deficient=bool(red.rank_deficient)
    )
    _emit(out, args.out)
    return EXIT_OK


def cmd_eval(args):
    inst = io.read_instance(args.instance)
    form, x, _ = _load_candidate(args.point, inst, args.index)
    ctx = EvalContext.make(inst, form)
    info = assess_point(x, ctx)
    out = {
        "formulation": form.value,
        "class_formulation": info["formulation"].value,
        "f": info["f"],
        "grad_norm": info["grad_norm"],
        "lambda_min": info["lambda_min"],
        "classification": info["classification"].value,
    }
    if args.spectrum_csv:
        cctx, xc = classification_coordinates(x, ctx)
        io.write_spectrum_csv(np.linalg.eigvalsh(hessian(xc, cctx)), args.spectrum_csv)
    _emit(out, args.out)
    return EXIT_OK


def cmd_check(args):
    from .checks import SUITES

    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        print(f"== {name}")
        for res in SUITES[name]():
            print(res.line())
            ok &= res.passed
    return EXIT_OK if ok else EXIT_FAILED


# --------------------------------------------------------------------------
# parser


def build_parser():
    from .checks import SUITES

    p = argparse.ArgumentParser(prog="edmlngm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", help="suppress human-readable lines")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a random centred instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", "-o")
    g.set_defaults(func=cmd_gen)

    m = sub.add_parser("minimize", parents=[common], help="multi-start trust-region search")
    m.add_argument("instance")
    m.add_argument("--formulation", type=_formulation, default=Formulation.REDUCED_L)
    m.add_argument("--starts", type=_positive_int, default=20)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--max-iters", type=int, default=500)
    m.add_argument("--start", help="single run from this point file instead of random starts")
    m.add_argument("--no-dedup", action="store_true", help="keep duplicate minimisers")
    m.add_argument("--trace", action="store_true", help="include per-iteration traces")
    m.add_argument("--trace-csv", metavar="PREFIX", help="write PREFIX_<start>.csv traces")
    m.add_argument("--out", "-o")
    m.set_defaults(func=cmd_minimize)

    c = sub.add_parser("certify", parents=[common], help="certify a local nonglobal minimiser")
    c.add_argument("instance")
    c.add_argument("--point", help="point file or minimize report")
    c.add_argument("--index", type=int, help="report index (default: first candidate)")
    c.add_argument("--r", type=_radius, default=1e-3, help="ball radius or 'auto'")
    c.add_argument("--fbar", type=_positive_float, help="objective floor (default f/2)")
    c.add_argument("--round", type=int,
                   help="round the candidate to this many decimals (-1: never; "
                        "default 6 for d=1 and 8 otherwise when reading a report)")
    c.add_argument("--verify", metavar="CERT", help="recompute a stored certificate")
    c.add_argument("--out", "-o")
    c.set_defaults(func=cmd_certify)

    nw = sub.add_parser("newton", parents=[common], help="pure Newton iterations from a point")
    nw.add_argument("instance")
    nw.add_argument("--point", required=True)
    nw.add_argument("--index", type=int)
    nw.add_argument("--steps", type=int, default=8)
    nw.add_argument("--to-certifiable", action="store_true",
                    help="iterate in the certifiable formulation (L for d=1, ell otherwise)")
    nw.add_argument("--out", "-o")
    nw.set_defaults(func=cmd_newton)

    r = sub.add_parser("reduce", parents=[common], help="QR-reduce a P or L point to triangular coordinates")
    r.add_argument("--point", required=True)
    r.add_argument("--instance")
    r.add_argument("--out", "-o")
    r.set_defaults(func=cmd_reduce)

    e = sub.add_parser("eval", parents=[common], help="objective, gradient norm and classification at a point")
    e.add_argument("instance")
    e.add_argument("--point", required=True)
    e.add_argument("--index", type=int)
    e.add_argument("--spectrum-csv", help="write Hessian eigenvalues as CSV")
    e.add_argument("--out", "-o")
    e.set_defaults(func=cmd_eval)

    k = sub.add_parser("check", parents=[common], help="run a property suite")
    k.add_argument("suite", choices=list(SUITES) + ["all"])
    k.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (EDMError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
