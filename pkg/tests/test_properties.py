"""Property-based checks of the algebraic identities."""

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from edmlngm.edm_core import (
    Instance,
    build_v,
    edm_of,
    lindenstrauss,
    lindenstrauss_adjoint,
    ltriag,
    ltriag_adjoint,
    reduce_to_triangular,
    tri_len,
)
from edmlngm.stress import EvalContext, gradient, hessian_apply, value

from oracles import brute_edm

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
dims = st.tuples(st.integers(2, 9), st.integers(1, 4))


def _sym(A):
    return A + A.T


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8).flatmap(lambda n: st.tuples(
    arrays(float, (n, n), elements=finite), arrays(float, (n, n), elements=finite))))
def test_lindenstrauss_adjointness(pair):
    G, S = map(_sym, pair)
    lhs = np.sum(lindenstrauss(G) * S)
    rhs = np.sum(G * lindenstrauss_adjoint(S))
    assert abs(lhs - rhs) <= 1e-12 * (1 + np.linalg.norm(G) * np.linalg.norm(S))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8).flatmap(lambda n: arrays(float, (n, n), elements=finite)))
def test_adjoint_rows_sum_to_zero_and_kill_diagonals(A):
    S = _sym(A)
    KS = lindenstrauss_adjoint(S)
    assert np.abs(KS.sum(axis=1)).max() <= 1e-12 * (1 + np.abs(S).max())
    assert np.array_equal(lindenstrauss_adjoint(np.diag(np.diag(S))), np.zeros_like(S))


@settings(max_examples=60, deadline=None)
@given(dims.flatmap(lambda nd: st.tuples(st.just(nd), arrays(float, nd, elements=finite))))
def test_edm_matches_brute_force(args):
    _, P = args
    assert np.allclose(edm_of(P), brute_edm(P), rtol=1e-12, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.integers(1, 12), st.data())
def test_ltriag_adjointness(n, d, data):
    t = tri_len(n, d)
    x = data.draw(arrays(float, (t,), elements=finite))
    L = data.draw(arrays(float, (n - 1, d), elements=finite))
    assert abs(np.sum(ltriag(x, n, d) * L) - x @ ltriag_adjoint(L)) <= 1e-12 * (
        1 + np.linalg.norm(x) * np.linalg.norm(L))


@settings(max_examples=40, deadline=None)
@given(dims.flatmap(lambda nd: arrays(float, (nd[0] - 1, nd[1]), elements=finite)))
def test_reduction_reconstructs(L):
    red = reduce_to_triangular(L)
    scale = 1 + np.abs(L).max()
    assert np.allclose(ltriag(red.ell, L.shape[0] + 1, L.shape[1]) @ red.Q.T, L, atol=1e-12 * scale)


@settings(max_examples=40, deadline=None)
@given(dims, st.integers(0, 2**32 - 1))
def test_invariance_and_lifts(nd, seed):
    n, d = nd
    rng = np.random.default_rng(seed)
    Pb = rng.standard_normal((n, d))
    inst = Instance(n, d, edm_of(Pb))
    ctx = EvalContext.make(inst)
    P = rng.standard_normal((n, d))
    f0 = value(P, ctx)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    assert abs(value(P @ Q + rng.standard_normal(d), ctx) - f0) <= 1e-11 * (1 + f0)
    L = build_v(n).T @ P
    fL = value(L, ctx.with_formulation("L"))
    assert abs(fL - f0) <= 1e-11 * (1 + f0)
    fe = value(reduce_to_triangular(L).ell, ctx.with_formulation("ell"))
    assert abs(fe - f0) <= 1e-10 * (1 + f0)


@settings(max_examples=40, deadline=None)
@given(dims, st.integers(0, 2**32 - 1))
def test_hessian_apply_is_symmetric(nd, seed):
    n, d = nd
    rng = np.random.default_rng(seed)
    inst = Instance(n, d, edm_of(rng.standard_normal((n, d))))
    ctx = EvalContext.make(inst)
    P, A, B = (rng.standard_normal((n, d)) for _ in range(3))
    a = np.sum(hessian_apply(P, A, ctx) * B)
    b = np.sum(A * hessian_apply(P, B, ctx))
    assert abs(a - b) <= 1e-10 * (1 + abs(a))
    # gradient is a translation-free cotangent
    assert np.abs(gradient(P, ctx).sum(axis=0)).max() <= 1e-9 * (1 + np.abs(gradient(P, ctx)).max())
