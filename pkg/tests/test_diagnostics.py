import json
import math

import numpy as np
import pytest

from dpeig.diagnostics import (CheckReport, check_gradients, check_holder,
                               check_inequality_chain, check_inequality_chain_random,
                               check_modular_norm_relations, check_normalization,
                               check_ray_blowup, embedding_constant, finite_difference_gradients,
                               ray_limit_profile, run_diagnostics)
from dpeig.exponents import ExponentField, parse_exponent_expression
from dpeig.functionals import Problem
from dpeig.mesh import DiscreteFunction, build_interval_mesh, build_rectangle_mesh, \
    random_smooth_function

M1 = build_interval_mesh(0, 1, 50)
M2 = build_rectangle_mesh((0, 1), (0, 1), 6, 6)


def consts(m, a1=2.8, a2=1.5, aq=2.0):
    return tuple(ExponentField.constant(v, m) for v in (a1, a2, aq))


def test_report_bookkeeping():
    r = CheckReport("x")
    assert r.record(1.0, 2.0)
    assert not r.record(2.0, 1.0, 0.5, {"k": 1})
    assert r.trials == 2 and r.failures == 1 and r.worst_violation == 0.5
    assert r.details == [{"input": {"k": 1}, "lhs": 2.0, "rhs": 1.0}]
    assert not r.record_strict(1.0, 1.0)
    json.dumps(r.to_dict())
    assert "FAIL" in r.line()


def test_report_nan_is_failure():
    r = CheckReport("x")
    r.record(math.nan, 1.0)
    assert r.failures == 1


def test_empty_report_serializes():
    assert CheckReport("x").to_dict()["worst_violation"] is None


@pytest.mark.parametrize("m", [M1, M2], ids=["interval", "rectangle"])
def test_modular_suite(m):
    p = parse_exponent_expression("2.4 + 0.8*sin(5*x)", m)
    for check in (check_modular_norm_relations, check_normalization, check_holder):
        rep = check(300, m, p, 3)
        assert rep.failures == 0, rep.details
        assert rep.worst_violation <= 0


def test_inequality_chain_zero_function():
    rep = check_inequality_chain(DiscreteFunction.zeros(M1), *consts(M1), mu_hat=9.0)
    assert rep.failures == 0 and rep.worst_violation == 0.0


def test_inequality_chain_random_nondegenerate():
    p1, p2, q = consts(M1)
    mu = embedding_constant(q)
    rep = check_inequality_chain_random(200, p1, p2, q, 5, mu)
    assert rep.failures == 0 and rep.worst_violation <= 0


def test_inequality_chain_detects_broken_chain():
    # q above p1: pointwise bound fails for large gradients
    p1, p2, q = consts(M1, 2.2, 1.5, 3.0)
    u = random_smooth_function(M1, np.random.default_rng(0), amplitude=50.0)
    assert check_inequality_chain(u, p1, p2, q).failures > 0


def test_embedding_constant_matches_min():
    q = parse_exponent_expression("2 + 0.5*x", M1)
    mu = embedding_constant(q)
    assert 0 < mu < math.pi ** 2 + 0.1


def test_ray_profile_closed_form_scaling():
    p1, p2, q = consts(M1)
    u = random_smooth_function(M1, np.random.default_rng(1))
    prof = dict(ray_limit_profile(u, [1e-3, 1.0, 1e3], p1, p2, q))
    assert prof[1e-3] > prof[1.0] and prof[1e3] > prof[1.0]
    # R(t) = (A t^0.8 + B t^-0.5) up to the fixed factor: check against the closed form
    b = Problem(p1, p2, q).breakdown(u)
    A = np.sum(M1.weights.ravel() * u.gradient_norms() ** 2.8) / 2.8
    B = np.sum(M1.weights.ravel() * u.gradient_norms() ** 1.5) / 1.5
    for t, r in prof.items():
        assert r == pytest.approx((A * t ** 0.8 + B * t ** -0.5) / b.I, rel=1e-10)


def test_ray_profile_single_point_and_errors():
    p1, p2, q = consts(M1)
    u = random_smooth_function(M1, np.random.default_rng(2))
    assert len(ray_limit_profile(u, [1.0], p1, p2, q)) == 1
    with pytest.raises(ValueError):
        ray_limit_profile(DiscreteFunction.zeros(M1), [1.0], p1, p2, q)
    with pytest.raises(ValueError):
        ray_limit_profile(u, [2.0, 1.0], p1, p2, q)
    with pytest.raises(ValueError):
        ray_limit_profile(u, [0.0, 1.0], p1, p2, q)


def test_ray_blowup_report():
    p1, p2, q = consts(M1, 3.5, 1.3, 2.2)
    u = random_smooth_function(M1, np.random.default_rng(3))
    assert check_ray_blowup(u, p1, p2, q, factor=10).passed


def test_gradients_zero_function():
    p = consts(M2)
    fd = finite_difference_gradients(DiscreteFunction.zeros(M2), *p)
    assert not np.any(fd)
    rep = check_gradients(0, M2, *p, u_list=[DiscreteFunction.zeros(M2)])
    assert rep.failures == 0


def test_gradients_single_hat():
    p = tuple(parse_exponent_expression(s, M1) for s in ("3 + x", "1.4 + 0.2*x", "2.1"))
    v = np.zeros(M1.n_nodes)
    v[20] = 0.7
    rep = check_gradients(0, M1, *p, u_list=[DiscreteFunction(M1, v)])
    assert rep.failures == 0 and rep.trials > 0


@pytest.mark.parametrize("m", [M1, M2], ids=["interval", "rectangle"])
def test_gradients_random(m):
    p = tuple(parse_exponent_expression(s, m) for s in
              ("3.2 + 0.3*sin(3*x)", "1.3 + 0.1*x", "1.9 + 0.2*x"))
    rep = check_gradients(20, m, *p, rng_seed=11)
    assert rep.failures == 0, rep.details
    assert rep.skipped < 0.2 * rep.trials


def test_run_diagnostics_all_pass():
    p = tuple(parse_exponent_expression(s, M1) for s in
              ("3.4 + 0.2*sin(3*x)", "1.5 + 0.1*x", "2.2 + 0.1*x"))
    reps = run_diagnostics(*p, rng_seed=0, n_modular=200, n_chain=50, n_gradient=3)
    names = [r.check_name for r in reps]
    assert names == ["modular_norm_relations", "normalization", "holder", "gradients",
                     "inequality_chain", "spectral_ordering", "ray_blowup"]
    assert all(r.passed for r in reps), [r.line() for r in reps]


def test_run_diagnostics_reports_invalid_triple():
    reps = run_diagnostics(*consts(M1, 2.0, 1.5, 2.5), n_modular=10, n_chain=5, n_gradient=1)
    assert reps[-1].check_name == "validation" and not reps[-1].passed
