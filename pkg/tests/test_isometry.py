import numpy as np
import pytest

from pberg.basis import HoloFunction, TruncatedBasis
from pberg.domains import ball, build_quadrature, disk, indicator
from pberg.isometry import (BranchError, IsometryError, IsometryOperator, disk_grid,
                            integer_power, isometry_defect, jacobian_power, map_roundtrip,
                            mobius, pullback_operator, reconstruct_map, scaling, unitary,
                            verify_jacobian_relation)

B = TruncatedBasis(1, 12)


@pytest.fixture(scope="module")
def rule():
    return build_quadrature(disk(1.0), 28)


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 3.0])
def test_identity_pullback(rule, p):
    op = pullback_operator(*scaling(1.0), p, B, B, rule)
    assert np.max(np.abs(op.matrix - np.eye(len(B)))) <= 1e-12
    assert op.projection_residual <= 1e-12
    F = reconstruct_map(op)
    g = disk_grid(0.9, 50)
    assert np.max(np.abs(F(g) - g)) <= 1e-12
    rep = verify_jacobian_relation(op, F, p, g, [HoloFunction.monomial(B, (k,)) for k in range(5)])
    assert rep.max_residual <= 1e-12


def test_scaling_pullback_p1(rule):
    op = pullback_operator(*scaling(0.5), 1.0, B, B, rule)
    assert op.matrix[0, 0] == pytest.approx(0.25)
    assert np.allclose(op.matrix[1:, 0], 0, atol=1e-14)
    F = reconstruct_map(op)
    assert F.denominator.coeffs[0] == pytest.approx(0.25)
    assert F.numerators[0].coeffs[1] == pytest.approx(0.125)
    g = disk_grid(0.9, 30)
    assert np.max(np.abs(F(g) - 0.5 * g)) <= 1e-12


def test_scaling_jacobian_point_example(rule):
    op = pullback_operator(*scaling(0.5), 1.0, B, B, rule)
    F = reconstruct_map(op)
    rep = verify_jacobian_relation(op, F, 1.0, np.array([[0.4]]), [HoloFunction.monomial(B, (1,))])
    assert rep.max_residual <= 1e-10


def test_mobius_isometry_battery_p2():
    b = TruncatedBasis(1, 25)
    r = build_quadrature(disk(1.0), 41)
    op = pullback_operator(*mobius(0.3), 2.0, b, b, r)
    assert np.max(isometry_defect(op, r, r, range(10))) <= 1e-5
    F = reconstruct_map(op)
    g = disk_grid(0.6, 200)
    assert np.max(np.abs(F(g) - mobius(0.3)[0](g))) <= 1e-6


@pytest.mark.parametrize("p", [1.0, 2.0])
@pytest.mark.parametrize("model", [scaling(1.0), scaling(0.5), mobius(0.3)])
def test_roundtrip_battery(p, model):
    rep = map_roundtrip(*model, p, degree=40, resolution=56)
    assert rep.sup_error <= 1e-6
    assert rep.jacobian.max_residual <= 1e-4
    assert rep.jacobian.n_excluded == 0 and rep.jacobian.battery_size == 10


def test_composition_of_scalings(rule):
    p = 1.0
    pa = pullback_operator(*scaling(0.5), p, B, B, rule)
    pb = pullback_operator(*scaling(0.8), p, B, B, rule)
    both = pullback_operator(*scaling(0.4), p, B, B, rule)
    # (psi o f o g) pulled back: first through f, then through g
    comp = pb @ pa
    assert np.max(np.abs(comp.matrix - both.matrix)) <= 1e-12 + comp.projection_residual


def test_unitary_ball_roundtrip():
    b = TruncatedBasis(2, 4)
    r = build_quadrature(ball(2), 16)
    th = 0.7
    U = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]) * np.exp(0.3j)
    op = pullback_operator(*unitary(U), 2.0, b, b, r)
    F = reconstruct_map(op)
    rng = np.random.default_rng(3)
    z = 0.4 * (rng.standard_normal((30, 2)) + 1j * rng.standard_normal((30, 2))) / 3
    assert np.max(np.abs(F(z) - z @ U.T)) <= 1e-10


def test_equidimension_refused():
    op = IsometryOperator(np.zeros((len(TruncatedBasis(1, 3)), len(TruncatedBasis(2, 1)))),
                          2.0, TruncatedBasis(2, 1), TruncatedBasis(1, 3))
    with pytest.raises(IsometryError, match="equidimension"):
        reconstruct_map(op)


def test_forward_operator_inversion(rule):
    op = pullback_operator(*scaling(0.5), 2.0, B, B, rule)
    fwd = IsometryOperator(np.linalg.inv(op.matrix), 2.0, B, B, "forward")
    F = reconstruct_map(fwd)
    g = disk_grid(0.5, 20)
    assert np.max(np.abs(F(g) - 0.5 * g)) <= 1e-8
    assert F.diagnostics


def test_branch_refused_on_annulus():
    ann = indicator([(-1, 1, -1, 1)], lambda z: (np.abs(z[:, 0]) < 1) & (np.abs(z[:, 0]) > 0.3))
    r = build_quadrature(ann, 40)
    # J = z winds once around the hole; 2/p = 4/3 is not an integer
    with pytest.raises(BranchError):
        jacobian_power(r.nodes[:, 0], 1.5, r.nodes, 0, simply_connected=False)
    assert integer_power(1.0) == 2 and integer_power(1.5) is None


def test_operator_json_roundtrip(rule):
    op = pullback_operator(*mobius(0.2), 1.0, B, B, rule)
    back = IsometryOperator.from_json(op.to_json())
    assert np.array_equal(back.matrix, op.matrix)
    assert back.p == op.p and back.source_basis == op.source_basis


def test_winding_detected_on_annulus():
    from pberg.isometry import _continuous_log
    ann = indicator([(-1, 1, -1, 1)], lambda z: (np.abs(z[:, 0]) < 1) & (np.abs(z[:, 0]) > 0.3))
    r = build_quadrature(ann, 40)
    with pytest.raises(BranchError, match="winds"):
        _continuous_log(r.nodes[:, 0], r.nodes, 0)


def test_continuous_branch_on_polar_rule(rule):
    J = mobius(0.3)[1](rule.nodes)
    w = jacobian_power(J, 3.0, rule.nodes, 0)
    assert np.allclose(w ** 3, J ** 2, rtol=1e-12)
