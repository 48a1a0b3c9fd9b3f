import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpeig.errors import ExponentDomainError, ExpressionError, MeshMismatchError, ValidationError
from dpeig.exponents import (ExponentField, exponent_from_spec, extrema, load_exponent_array,
                             parse_exponent_expression, validate_triple)
from dpeig.mesh import build_interval_mesh, build_rectangle_mesh

M1 = build_interval_mesh(0, 1, 200)
M2 = build_rectangle_mesh((0, 1), (0, 1), 6, 6)


def test_constant_expression():
    f = parse_exponent_expression("2.5", M2)
    assert extrema(f) == (2.5, 2.5)
    assert f.is_constant


def test_affine_extrema_inner_approximation():
    lo, hi = extrema(parse_exponent_expression("2 + x", M1))
    assert 2 < lo < 2 + 1e-2 and 3 - 1e-2 < hi < 3


def test_oscillating_extrema_against_dense_sampling():
    # dense oracle: 1e5 points of 2.5 + 0.4 sin(6x) on (0,1) give (2.1, 2.9)
    xs = np.linspace(0, 1, 100_000)
    dense = 2.5 + 0.4 * np.sin(6 * xs)
    lo, hi = extrema(parse_exponent_expression("2.5 + 0.4*sin(6*x)", M1))
    assert lo == pytest.approx(dense.min(), abs=1e-3)
    assert hi == pytest.approx(dense.max(), abs=1e-3)
    assert dense.min() <= lo and hi <= dense.max()


def test_constant_field_extrema():
    assert extrema(ExponentField.constant(3, M1)) == (3.0, 3.0)


@pytest.mark.parametrize("expr", ["0.5", "1", "1 + x - x", "2 - 2*x"])
def test_values_not_above_one_rejected(expr):
    with pytest.raises(ExponentDomainError):
        parse_exponent_expression(expr, M1)


def test_non_finite_rejected():
    with pytest.raises(ExponentDomainError):
        ExponentField(M1, np.full(M1.n_quad, np.inf))


def test_bad_expression_propagates():
    with pytest.raises(ExpressionError):
        parse_exponent_expression("2 + z", M1)


def test_deterministic_sampling():
    a = parse_exponent_expression("3 + 0.2*sin(5*x)*cos(y)", M2).values
    b = parse_exponent_expression("3 + 0.2*sin(5*x)*cos(y)", M2).values
    assert a.tobytes() == b.tobytes()


def test_conjugate():
    p = parse_exponent_expression("2 + x", M1)
    pc = p.conjugate()
    np.testing.assert_allclose(1 / p.values + 1 / pc.values, 1.0)


def test_spec_forms(tmp_path):
    vals = np.full(M1.n_quad, 2.25)
    path = tmp_path / "p.txt"
    np.savetxt(path, vals)
    assert exponent_from_spec(f"@{path}", M1).minus == 2.25
    assert load_exponent_array(path, M1).plus == 2.25
    assert exponent_from_spec(3, M1).minus == 3.0
    assert exponent_from_spec("1.5 + x", M1).plus > 2.4
    np.savetxt(path, vals[:-1])
    with pytest.raises(MeshMismatchError):
        load_exponent_array(path, M1)


def const(v, m=M1):
    return ExponentField.constant(v, m)


def test_validate_good_triple():
    r = validate_triple(const(2.8), const(1.5), const(2), 3)
    assert r.chain_ok and r.subcritical_ok and r.ok


def test_validate_broken_chain_everywhere():
    r = validate_triple(const(2.8), const(1.5), const(3), 3)
    assert not r.chain_ok
    assert len(r.witness_points) == M1.n_quad
    assert any("chain condition" in msg for msg in r.messages)
    with pytest.raises(ValidationError, match="chain condition"):
        r.raise_if_invalid()


def test_validate_low_dimension_warning():
    m = M2
    r = validate_triple(const(3.5, m), const(1.6, m), const(2, m), 2)
    assert r.ok
    assert any("p1+" in w for w in r.dimension_warnings)


def test_validate_subcritical_failure():
    # N = 3, p2 = 1.2: critical exponent 3*1.2/1.8 = 2, so q = 2.5 is supercritical
    r = validate_triple(const(3.5), const(1.2), const(2.5), 3)
    assert r.chain_ok and not r.subcritical_ok
    assert any("subcritical condition" in msg for msg in r.messages)


def test_validate_local_witness():
    p1 = parse_exponent_expression("2.2 + 2*x", M1)  # dips below q+ = 2.5 near x = 0
    r = validate_triple(p1, const(1.5), const(2.5), 3)
    assert not r.chain_ok
    xs = np.array([w[0] for w in r.witness_points])
    assert xs.max() <= 0.15 + 1e-9


def test_validate_mesh_mismatch():
    with pytest.raises(MeshMismatchError):
        validate_triple(const(3), const(1.5), const(2, build_interval_mesh(0, 1, 10)), 3)


def test_report_to_dict():
    d = validate_triple(const(2.8), const(1.5), const(3), 3).to_dict()
    assert d["chain_ok"] is False and d["n_witnesses"] == M1.n_quad
    assert len(d["witness_points"]) == 20


@given(st.floats(1.05, 5), st.floats(1.05, 5), st.floats(1.05, 5))
def test_constant_chain_matches_inequality(a1, a2, aq):
    r = validate_triple(const(a1), const(a2), const(aq), 1)
    assert r.chain_ok == (a2 < aq < a1)
