import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pberg.basis import (BasisError, HoloFunction, SingularSystemError, TruncatedBasis,
                         evaluate_basis, graded_lex, project)
from pberg.domains import build_quadrature, disk


def test_graded_lex_layout():
    idx = graded_lex(2, 2)
    assert idx.tolist()[:3] == [[0, 0], [1, 0], [0, 1]]
    assert len({tuple(a) for a in idx}) == len(idx) == 6
    assert all(sum(a) <= 2 for a in idx)


@pytest.mark.parametrize("n, d, size", [(1, 30, 31), (2, 12, 91), (3, 8, 165)])
def test_basis_sizes(n, d, size):
    assert len(TruncatedBasis(n, d)) == size


def test_evaluate_examples():
    b = TruncatedBasis(1, 2)
    v, _ = evaluate_basis(b, 0.0)
    np.testing.assert_allclose(v, [1, 0, 0])
    v, g = evaluate_basis(b, 0.5, with_gradient=True)
    np.testing.assert_allclose(v, [1, 0.5, 0.25])
    np.testing.assert_allclose(g[:, 0], [0, 1, 1.0])


def test_evaluate_dimension_mismatch():
    with pytest.raises(Exception):
        evaluate_basis(TruncatedBasis(2, 2), [0.1, 0.2, 0.3])


def test_project_exact_monomial(unit_rule):
    f, res = project(lambda z: z[:, 0] ** 2, TruncatedBasis(1, 3), unit_rule)
    np.testing.assert_allclose(f.coeffs, [0, 0, 1, 0], atol=1e-12)
    assert res <= 1e-12


def test_project_mobius_pullback_density():
    a = 0.3
    rule = build_quadrature(disk(1.0), 48)
    samples = lambda z: ((1 - a * a) / (1 - a * z[:, 0]) ** 2) ** 2
    _, res = project(samples, TruncatedBasis(1, 25), rule)
    assert res <= 1e-6


def test_project_slow_geometric_tail(unit_rule):
    _, res = project(lambda z: 1 / (1 - 0.9 * z[:, 0]), TruncatedBasis(1, 10), unit_rule)
    assert res > 1e-2


def test_rank_deficient_projection_reports_condition():
    rule = build_quadrature(disk(1.0), 4)
    with pytest.raises(SingularSystemError) as info:
        project(lambda z: z[:, 0], TruncatedBasis(1, 40), rule)
    assert info.value.condition > 1e10


coeff = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@settings(max_examples=25, deadline=None)
@given(st.lists(coeff, min_size=6, max_size=6), st.lists(coeff, min_size=6, max_size=6), coeff, coeff)
def test_projection_idempotent_and_linear(cf, cg, a, b):
    basis = TruncatedBasis(1, 5)
    rule = build_quadrature(disk(1.0), 16)
    f, g = HoloFunction(basis, cf), HoloFunction(basis, cg)
    pf, rf = project(f(rule.nodes), basis, rule)
    scale = 1 + np.max(np.abs(cf))
    assert np.max(np.abs(pf.coeffs - f.coeffs)) <= 1e-12 * scale
    assert rf <= 1e-12
    h = a * f + b * g
    ph, _ = project(h(rule.nodes), basis, rule)
    pg, _ = project(g(rule.nodes), basis, rule)
    lin = a * pf.coeffs + b * pg.coeffs
    assert np.max(np.abs(ph.coeffs - lin)) <= 1e-12 * (1 + np.max(np.abs(lin)))


def test_holofunction_json_roundtrip_and_gradient():
    b = TruncatedBasis(2, 3)
    f = HoloFunction(b, np.arange(len(b)) * (1 + 0.5j))
    g = HoloFunction.from_json(f.to_json())
    assert g.basis == b and np.array_equal(g.coeffs, f.coeffs)
    z = np.array([[0.1 + 0.2j, -0.3j]])
    h = 1e-6
    num = (f(z + [[h, 0]]) - f(z - [[h, 0]])) / (2 * h)
    assert abs(num[0] - f.gradient(z)[0, 0]) < 1e-6
    with pytest.raises(BasisError):
        HoloFunction(b, [1.0])
