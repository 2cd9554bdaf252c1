import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pberg._solver import SolverOptions
from pberg.basis import HoloFunction, TruncatedBasis
from pberg.domains import ball, build_quadrature, disk, ellipse
from pberg.extremal import (ZERO, DomainPointError, Weight, disk_kernel_closed_form, gram_kernel,
                            kernel_profile, p_extremal, pnorm)
from pberg.variation import psh_probe

B20 = TruncatedBasis(1, 20)
B30 = TruncatedBasis(1, 30)


def test_pnorm_examples(unit_rule):
    one = HoloFunction.constant(B20)
    z = HoloFunction.monomial(B20, (1,))
    assert pnorm(one, 1.0, unit_rule) == pytest.approx(math.pi, rel=1e-12)
    assert pnorm(z, 2.0, unit_rule) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)
    w = Weight(lambda q: np.abs(q[:, 0]) ** 2)
    assert pnorm(one, 2.0, unit_rule, w) == pytest.approx(math.sqrt(math.pi * (1 - math.exp(-1))), rel=1e-10)


def test_weight_rejects_minus_infinity(unit_rule):
    w = Weight(lambda q: np.log(np.abs(q[:, 0])) * 0 - np.inf)
    with pytest.raises(ValueError):
        w.node_weights(unit_rule)


@pytest.mark.parametrize("z", [0.0, 0.5, 0.3 + 0.4j, 0.7])
def test_gram_kernel_disk(z):
    rule = build_quadrature(disk(1.0), 48)
    assert gram_kernel(B30, rule, ZERO, z) == pytest.approx(disk_kernel_closed_form(z, 2.0), rel=1e-6)


def test_gram_kernel_center_values():
    assert gram_kernel(B30, build_quadrature(disk(1.0), 32), ZERO, 0.0) == pytest.approx(1 / math.pi, abs=1e-9)
    b2 = gram_kernel(TruncatedBasis(2, 12), build_quadrature(ball(2), 28), ZERO, np.zeros(2))
    assert b2 == pytest.approx(2 / math.pi ** 2, abs=1e-6)


@pytest.mark.parametrize("p", [0.5, 1.0, 1.5, 3.0])
def test_disk_center(p, unit_rule):
    r = p_extremal(B20, unit_rule, ZERO, p, 0.0)
    assert r.kernel_value == pytest.approx(math.pi ** (-2 / p), rel=1e-3)
    assert r.converged


def test_mobius_oracle_p1():
    rule = build_quadrature(disk(1.0), 40)
    r = p_extremal(B30, rule, ZERO, 1.0, 0.5)
    assert r.kernel_value == pytest.approx(0.32022, rel=5e-3)
    assert r.kernel_value == pytest.approx(math.pi ** -2 * 0.75 ** -4, rel=1e-8)


@pytest.mark.parametrize("p", [0.7, 1.0, 2.0, 3.0])
def test_result_invariants(p):
    rule = build_quadrature(disk(1.0), 32)
    z = 0.2 - 0.3j
    r = p_extremal(B20, rule, ZERO, p, z)
    assert abs(r.extremal(np.array([[z]]))[0] - 1) <= 1e-10
    recomputed = pnorm(r.extremal, p, rule) ** -2
    assert abs(recomputed - r.kernel_value) <= 1e-10 * r.kernel_value
    assert r.stationarity <= r.tol or not r.converged


def test_p2_agrees_with_gram(unit_rule):
    for z in (0.0, 0.4j, 0.6):
        a = p_extremal(B20, unit_rule, ZERO, 2.0, z).kernel_value
        assert a == pytest.approx(gram_kernel(B20, unit_rule, ZERO, z), rel=1e-6)


def test_point_outside_rejected(unit_rule):
    with pytest.raises(DomainPointError):
        p_extremal(B20, unit_rule, ZERO, 1.0, 1.2, domain=disk(1.0))
    with pytest.raises(ValueError):
        p_extremal(B20, unit_rule, ZERO, -1.0, 0.0)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_truncation_monotone(p):
    rule = build_quadrature(disk(1.0), 40)
    vals = [p_extremal(TruncatedBasis(1, d), rule, ZERO, p, 0.6).kernel_value for d in (2, 5, 10, 20)]
    assert all(b >= a * (1 - 1e-8) for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("p", [1.0, 3.0])
@pytest.mark.parametrize("r", [0.5, 2.0])
def test_scaling_covariance(p, r):
    base = p_extremal(B20, build_quadrature(disk(1.0), 32), ZERO, p, 0.3 + 0.1j).kernel_value
    scaled = p_extremal(B20, build_quadrature(disk(r), 32), ZERO, p, r * (0.3 + 0.1j)).kernel_value
    assert scaled * r ** (4 / p) == pytest.approx(base, rel=1e-8)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_domain_monotonicity(p):
    small, large = build_quadrature(disk(0.8), 32), build_quadrature(disk(1.0), 32)
    for z in (0.0, 0.3, 0.5j):
        a = p_extremal(B20, small, ZERO, p, z)
        b = p_extremal(B20, large, ZERO, p, z)
        assert a.kernel_value > b.kernel_value + a.tol * a.kernel_value + b.tol * b.kernel_value


def test_ellipse_profile_increasing():
    path = [1 - 2.0 ** -k for k in range(1, 6)]
    prof = kernel_profile(ellipse(1.0, 0.5), 2.0, path, TruncatedBasis(1, 40),
                          build_quadrature(ellipse(1.0, 0.5), 64))
    assert all(q.increasing for q in prof[1:])


def test_disk_profile_p2():
    path = [1 - 2.0 ** -k for k in range(1, 6)]
    prof = kernel_profile(disk(1.0), 2.0, path, TruncatedBasis(1, 256), build_quadrature(disk(1.0), 272))
    for q in prof:
        assert q.kernel_value == pytest.approx(disk_kernel_closed_form(q.point[0], 2.0), rel=1e-3)


def test_profile_rejects_exterior():
    with pytest.raises(DomainPointError):
        kernel_profile(disk(1.0), 2.0, [0.5, 1.5], B20, build_quadrature(disk(1.0), 16))


def test_log_kernel_is_subharmonic_in_z(unit_rule):
    field = np.vectorize(lambda z: math.log(p_extremal(B20, unit_rule, ZERO, 1.0, z).kernel_value))
    rep = psh_probe(field, [0.1, 0.2j], [0.15], tol=1e-6, n_angles=64)
    assert rep.violations == 0 and np.all(rep.margins > 0)


def test_subunit_p_multistart_reports_spread(unit_rule):
    r = p_extremal(B20, unit_rule, ZERO, 0.5, 0.3, SolverOptions(n_starts=4))
    assert r.start_spread >= 0
    assert r.kernel_value > 0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 4.0), st.complex_numbers(min_magnitude=0.1, max_magnitude=5))
def test_pnorm_homogeneity(p, lam):
    rule = build_quadrature(disk(1.0), 16)
    f = HoloFunction(TruncatedBasis(1, 3), [1.0, 0.5j, -0.2, 0.1])
    assert pnorm(f * lam, p, rule) == pytest.approx(abs(lam) * pnorm(f, p, rule), rel=1e-12)
