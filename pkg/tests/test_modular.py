import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpeig.errors import MeshMismatchError
from dpeig.exponents import ExponentField, parse_exponent_expression
from dpeig.mesh import DiscreteFunction, build_interval_mesh, build_rectangle_mesh
from dpeig.modular import ScalarField, holder_bound, luxemburg_norm, modular, sobolev_norm

M = build_interval_mesh(0, 1, 200)
(XQ,) = M.quadrature_coordinates()


def const(v, m=M):
    return ExponentField.constant(v, m)


def test_modular_unit_constant():
    assert modular(np.ones(M.n_quad), const(2)) == pytest.approx(1.0, abs=1e-12)


def test_modular_constant_power():
    assert modular(np.full(M.n_quad, 2.0), const(2)) == pytest.approx(4.0, abs=1e-12)


def test_modular_cubic():
    assert abs(modular(XQ, const(3)) - 0.25) < 1e-10


def test_norm_of_one_any_exponent():
    p = parse_exponent_expression("2 + sin(7*x)", M)
    assert luxemburg_norm(np.ones(M.n_quad), p) == pytest.approx(1.0, abs=1e-11)


def test_norm_l2_of_x():
    assert abs(luxemburg_norm(XQ, const(2)) - math.sqrt(1 / 3)) < 1e-8


@pytest.mark.parametrize("c", [0.3, 1.0, 2.0, 17.0])
def test_norm_piecewise_exponent(c):
    # p = 2 on x < 1/2, 4 on x >= 1/2: y/2 + y^2/2 = 1 with y = (c/mu)^2 gives mu = c
    p = ExponentField(M, np.where(XQ < 0.5, 2.0, 4.0))
    assert luxemburg_norm(np.full(M.n_quad, c), p) == pytest.approx(c, rel=1e-11)


def test_norm_of_zero():
    assert luxemburg_norm(np.zeros(M.n_quad), const(2.5)) == 0.0


def test_sobolev_norm_zero():
    assert sobolev_norm(DiscreteFunction.zeros(M), const(2)) == 0.0


def test_sobolev_norm_tent():
    # |u'| = 1 everywhere on (0,1), p = 2 -> 1
    m = build_interval_mesh(0, 1, 100)
    x = m.nodes[:, 0]
    u = DiscreteFunction(m, np.minimum(x, 1 - x))
    assert sobolev_norm(u, const(2, m)) == pytest.approx(1.0, abs=1e-10)


def test_holder_equality_edge():
    lhs, rhs = holder_bound(np.ones(M.n_quad), np.ones(M.n_quad), const(2))
    assert lhs == pytest.approx(1.0, abs=1e-12) and rhs == pytest.approx(1.0, abs=1e-10)


def test_holder_zero():
    lhs, rhs = holder_bound(np.zeros(M.n_quad), XQ, const(3))
    assert lhs == 0.0 <= rhs


def test_holder_closed_form():
    lhs, rhs = holder_bound(XQ, 1 - XQ, const(2))
    assert lhs == pytest.approx(1 / 6, abs=1e-12)
    assert rhs == pytest.approx(1 / 3, abs=1e-10)


def test_scalar_field_checks():
    m2 = build_rectangle_mesh((0, 1), (0, 1), 3, 3)
    f = ScalarField.from_function(lambda x, y: x + y, m2)
    assert f.values.shape == (m2.n_quad,)
    with pytest.raises(MeshMismatchError):
        modular(f, const(2))
    with pytest.raises(MeshMismatchError):
        ScalarField(M, np.ones(5))
    with pytest.raises(ValueError):
        ScalarField(M, np.full(M.n_quad, np.nan))


P_VAR = parse_exponent_expression("2.5 + 1.2*sin(4*x)", M)
samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=4, max_size=4)


def _field(coefs):
    return coefs[0] + coefs[1] * np.sin(3 * XQ) + coefs[2] * XQ ** 2 + coefs[3] * np.cos(11 * XQ)


@given(samples)
def test_norm_modular_sandwich(coefs):
    f = _field(coefs)
    nrm = luxemburg_norm(f, P_VAR)
    if nrm == 0:
        return
    rho = modular(f, P_VAR)
    lo, hi = P_VAR.minus, P_VAR.plus
    a, b = (lo, hi) if nrm > 1 else (hi, lo)
    assert nrm ** a <= rho * (1 + 1e-9)
    assert rho <= nrm ** b * (1 + 1e-9)


@given(samples)
def test_normalization_identity(coefs):
    f = _field(coefs)
    nrm = luxemburg_norm(f, P_VAR)
    if nrm > 0:
        assert modular(f / nrm, P_VAR) == pytest.approx(1.0, abs=1e-9)


@given(samples, st.floats(-1e2, 1e2).filter(lambda c: abs(c) > 1e-3))
def test_norm_homogeneous(coefs, c):
    f = _field(coefs)
    assert luxemburg_norm(c * f, P_VAR) == pytest.approx(abs(c) * luxemburg_norm(f, P_VAR),
                                                         rel=1e-10, abs=1e-300)


@given(samples, samples)
def test_norm_triangle_inequality(a, b):
    f, g = _field(a), _field(b)
    lhs = luxemburg_norm(f + g, P_VAR)
    rhs = luxemburg_norm(f, P_VAR) + luxemburg_norm(g, P_VAR)
    assert lhs <= rhs * (1 + 1e-10) + 1e-300


@given(samples, samples)
def test_holder_property(a, b):
    lhs, rhs = holder_bound(_field(a), _field(b), P_VAR)
    assert lhs <= rhs * (1 + 1e-9) + 1e-300


def test_null_sequence_monotone():
    g = _field([1.0, 2.0, -3.0, 0.5])
    rhos = [modular(g / n, P_VAR) for n in (1, 10, 100, 1000)]
    nrms = [luxemburg_norm(g / n, P_VAR) for n in (1, 10, 100, 1000)]
    assert all(b < a for a, b in zip(rhos, rhos[1:]))
    assert all(b < a for a, b in zip(nrms, nrms[1:]))
    assert rhos[-1] < 1e-5 and nrms[-1] < 1e-2
