import math

import numpy as np
import pytest

from edmlngm.certifier import (
    Certificate,
    certify_from_scalars,
    certify_lngm,
    hessian_floor,
    hessian_variation_bound,
    kantorovich_params,
    kantorovich_quantities,
    lipschitz_from_pair_sum,
    lipschitz_gamma,
    newton_error_bounds,
    objective_floor_radius,
    suggest_radius,
    verify_certificate,
)
from edmlngm.edm_core import random_instance
from edmlngm.errors import DomainError
from edmlngm.io import dumps, loads
from edmlngm.pipeline import find_and_certify
from edmlngm.solver import newton_iterate
from edmlngm.stress import EvalContext, gradient, hessian, value

from oracles import brute_pair_sum


@pytest.fixture(scope="module")
def line_case():
    inst = random_instance(50, 1, seed=0)
    _, pairs = find_and_certify(inst, 20, seed=0, r=1e-3)
    good = [p for p in pairs if p[3].certified]
    assert good, "expected a certified candidate on the seed-0 line instance"
    _, cctx, xc, cert = good[0]
    return inst, cctx, xc, cert


def test_variation_bound_reference_value():
    assert math.ceil(hessian_variation_bound(2127.9, 50, 1e-3)) == 145


def test_lipschitz_is_variation_over_diameter():
    v = hessian_variation_bound(1000.0, 20, 1e-2)
    assert lipschitz_from_pair_sum(1000.0, 20, 1e-2, safety=1.0) == pytest.approx(v / 2e-2, rel=1e-14)
    assert lipschitz_from_pair_sum(1000.0, 20, 1e-2) == pytest.approx(1.1 * v / 2e-2, rel=1e-14)
    with pytest.raises(DomainError):
        hessian_variation_bound(1.0, 2, 0.0)


def test_lipschitz_gamma_uses_ordered_pair_sum():
    inst = random_instance(9, 2, seed=1)
    ctx = EvalContext.make(inst, "ell")
    from edmlngm.solver import classification_coordinates

    _, ell = classification_coordinates(inst.P_bar, EvalContext.make(inst))
    S = brute_pair_sum(ctx.to_P(ell))
    assert lipschitz_gamma(ell, ctx, 1e-3, safety=1.0) == pytest.approx(
        24 * math.sqrt(2) * (S + 2 * 9 * 3 * 1e-3), rel=1e-12
    )


def test_floors():
    assert hessian_floor(211.0, 145.0, 1e-3) == pytest.approx(210.855)
    assert objective_floor_radius(10.0, 5.0, 1.0, 1.0) == 1.0
    assert objective_floor_radius(10.0, 5.0, 100.0, 1.0) == 0.05
    assert objective_floor_radius(10.0, 5.0, 0.0, 1.0) == 1.0
    with pytest.raises(DomainError):
        objective_floor_radius(1.0, 2.0, 1.0, 1.0)


def test_kantorovich_reference_values():
    kp = kantorovich_quantities(1.0e-4, 1.3e-5, 651.0)
    assert kp.alpha == pytest.approx(8.7e-7, rel=0.05)
    assert kp.r0 == pytest.approx(1.3e-5, rel=0.05)
    assert kp.r0 <= kp.r1_unclamped


def test_kantorovich_small_alpha_has_no_cancellation():
    kp = kantorovich_quantities(1e-3, 1e-12, 1.0)
    assert kp.r0 == pytest.approx(1e-12, rel=1e-9)


def test_kantorovich_alpha_too_large():
    kp = kantorovich_quantities(1.0, 1.0, 1.0)
    assert kp.alpha == 1.0 and kp.r0 is None and kp.r1_unclamped is None


def test_kantorovich_params_from_matrices():
    H = np.diag([2.0, 4.0])
    g = np.array([1.0, 0.0])
    kp = kantorovich_params(H, g, 3.0)
    assert kp.beta == 0.5 and kp.eta == 0.5 and kp.alpha == 0.75
    with pytest.raises(DomainError):
        kantorovich_params(np.diag([-1.0, 1.0]), g, 1.0)


def test_newton_bounds_two_readings():
    printed, classical = newton_error_bounds(0.1, 1e-3, steps=4)
    assert printed[0] == pytest.approx(1e-2)
    assert printed[1] == classical[1]
    assert classical[3] < printed[3]


def test_scalar_verdicts():
    ok = certify_from_scalars(211.0, 145.0, 1e-3, 2.6e3, 1e3, 1.8e-3, 5.7e-4, 2.4e-6)
    assert ok["verdict"] == "CERTIFIED" and ok["reasons"] == []
    bad = certify_from_scalars(0.1, 145.0, 1e-3, 2.6e3, 1e3, 1.8e-3, 10.0, 2.4e-6)
    assert bad["verdict"] == "FAILED"
    assert any("Hessian floor" in r for r in bad["reasons"])
    bad = certify_from_scalars(211.0, 145.0, 1e-3, 1.0, 2.0, 1.8e-3, 5.7e-4, 2.4e-6)
    assert any("does not exceed" in r for r in bad["reasons"])
    bad = certify_from_scalars(211.0, 145.0, 1e-3, 2.6e3, 1e3, 1.8e-3, 5.7e-4, 2e-2)
    assert any("r0" in r or "alpha" in r for r in bad["reasons"])
    bad = certify_from_scalars(211.0, 145.0, 1e-3, 2.6e3, 1e3, 1.8e-3, 5.7e-4, 2.4e-6,
                               first_rows_sigma_min=1e-5, d=2)
    assert any("first 2 rows" in r for r in bad["reasons"])


def test_wrong_formulation_is_a_domain_error():
    inst = random_instance(6, 2, seed=0)
    with pytest.raises(DomainError, match="not on P"):
        certify_lngm(inst.P_bar, EvalContext.make(inst, "P"))
    with pytest.raises(DomainError, match="non-isolated"):
        certify_lngm(np.zeros((5, 2)), EvalContext.make(inst, "L"))


def test_generator_point_fails():
    inst = random_instance(50, 1, seed=0)
    ctx = EvalContext.make(inst, "L")
    cert = certify_lngm(ctx.V.T @ inst.P_bar, ctx)
    assert cert.verdict == "FAILED"


def test_line_candidate_certificate(line_case):
    inst, ctx, xc, cert = line_case
    assert cert.certified
    assert cert.alpha <= 0.5 and cert.r0 <= cert.r
    assert cert.lambda_floor > 0
    assert cert.fbar == pytest.approx(cert.f / 2)
    seq = newton_iterate(xc, ctx, 8)
    xs = seq[-1]
    assert np.linalg.norm(xs - xc) <= cert.r0 * (1 + 1e-6)
    assert value(xs, ctx) > cert.fbar
    assert np.linalg.eigvalsh(hessian(xs, ctx))[0] > 0
    assert np.linalg.norm(gradient(xs, ctx)) < 1e-8
    # the printed error bound holds for the first two iterates
    for k in range(2):
        assert np.linalg.norm(seq[k] - xs) <= cert.newton_bound_printed[k] * (1 + 1e-6) + 1e-15


def test_certificate_json_roundtrip_and_verify(line_case):
    inst, ctx, xc, cert = line_case
    back = Certificate.from_dict(loads(dumps(cert.to_dict())))
    assert back == cert
    ok, fresh = verify_certificate(back, inst)
    assert ok and fresh.certified
    assert dumps(fresh.to_dict()) == dumps(cert.to_dict())
    other = random_instance(50, 1, seed=1)
    ok, fresh = verify_certificate(back, other)
    assert not ok and fresh is None


def test_suggest_radius(line_case):
    _, ctx, xc, cert = line_case
    r = suggest_radius(xc, ctx)
    gamma = lipschitz_gamma(xc, ctx, r)
    assert gamma * r == pytest.approx(cert.lambda_min / 2, rel=1e-6)
    inst = random_instance(5, 1, seed=0)
    assert suggest_radius(np.zeros((4, 1)), EvalContext.make(inst, "L")) is None
