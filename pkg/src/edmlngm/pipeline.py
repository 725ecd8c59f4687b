"""Search-then-certify driver shared by the CLI and the checks."""

from dataclasses import replace

import numpy as np

from .certifier import certify_lngm
from .solver import Classification, SolveOptions, classification_coordinates, multi_start_scan
from .stress import EvalContext, Formulation

DEFAULT_DECIMALS = 6


def certification_point(x, ctx, decimals=DEFAULT_DECIMALS):
    """Map a search result to the certifiable formulation.

    ``decimals`` rounds the candidate to a short decimal grid, so the stored
    point is exactly representable in the JSON file and the Newton
    displacement to the true minimiser sits well above rounding noise.
    """
    cctx, xc = classification_coordinates(x, ctx)
    if decimals is not None:
        xc = np.round(xc, decimals)
    return cctx, xc


def find_and_certify(instance, starts, seed=0, r=1e-3, fbar=None, decimals=DEFAULT_DECIMALS,
                     opts=None, formulation=Formulation.REDUCED_L):
    """Multi-start search followed by :func:`certify_lngm` on every candidate.

    Returns ``(reports, pairs)`` where ``pairs`` lists
    ``(report, context, point, certificate)`` for each ``LNGM_CANDIDATE``.
    """
    opts = replace(opts or SolveOptions(), seed=seed)
    reports = multi_start_scan(instance, formulation, starts, opts)
    ctx = EvalContext.make(instance, formulation)
    pairs = []
    for rep in reports:
        if rep.classification is not Classification.LNGM_CANDIDATE:
            continue
        cctx, xc = certification_point(rep.x, ctx, decimals)
        pairs.append((rep, cctx, xc, certify_lngm(xc, cctx, r=r, fbar=fbar)))
    return reports, pairs
