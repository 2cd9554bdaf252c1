"""The compiled kernels and their numpy twins agree."""

import numpy as np
import pytest

from pberg import _kernels, _pycore
from pberg._design import DenseDesign, RingDesign
from pberg.basis import TruncatedBasis
from pberg.domains import build_quadrature, disk

core = pytest.importorskip("pberg._core")


def test_backend_selected():
    assert _kernels.BACKEND in ("cython", "python")


def test_neumaier_sum(rng):
    x = np.concatenate([[1e16, 1.0, -1e16], rng.standard_normal(1000)])
    assert core.neumaier_sum(x) == pytest.approx(_pycore.neumaier_sum(x), abs=1e-12)
    assert core.neumaier_sum(np.array([1e16, 1.0, -1e16])) == 1.0


@pytest.mark.parametrize("sum_mode", [False, True])
def test_ring_accumulate(rng, sum_mode):
    a = rng.random((7, 9))
    data = rng.standard_normal((7, 16))
    spec = np.fft.fft(data, axis=1) if not sum_mode else np.fft.ifft(
        data + 1j * rng.standard_normal((7, 16)), axis=1)
    spec = np.ascontiguousarray(spec)
    np.testing.assert_allclose(core.ring_accumulate(a, spec, sum_mode),
                               _pycore.ring_accumulate(a, spec, sum_mode), atol=1e-12)


def test_monomial_design(rng):
    pts = np.ascontiguousarray(rng.standard_normal((20, 2)) + 1j * rng.standard_normal((20, 2)))
    exps = np.ascontiguousarray(TruncatedBasis(2, 4).indices.astype(np.int_))
    np.testing.assert_allclose(core.monomial_design(pts, exps),
                               _pycore.monomial_design(pts, exps), rtol=1e-13)


def test_ring_design_matches_dense(rng):
    basis = TruncatedBasis(1, 12)
    rule = build_quadrature(disk(1.0), 16)
    ring, dense = RingDesign(basis, rule), DenseDesign(basis, rule)
    c = rng.standard_normal(13) + 1j * rng.standard_normal(13)
    rho = rng.random(len(rule))
    sigma = rng.standard_normal(len(rule)) + 1j * rng.standard_normal(len(rule))
    np.testing.assert_allclose(ring.values(c), dense.values(c), atol=1e-12)
    np.testing.assert_allclose(ring.adjoint(sigma), dense.adjoint(sigma), atol=1e-11)
    np.testing.assert_allclose(ring.gram(rho), dense.gram(rho), atol=1e-12)
    np.testing.assert_allclose(ring.bigram(sigma), dense.bigram(sigma), atol=1e-11)


def test_pure_fallback_gives_same_kernel():
    import subprocess
    import sys
    code = ("from pberg import *; from pberg.extremal import ZERO; import pberg;"
            "r = p_extremal(TruncatedBasis(1, 16), build_quadrature(disk(1.0), 24), ZERO, 1.0, 0.4);"
            "print(pberg.BACKEND, repr(r.kernel_value))")
    env = dict(__import__("os").environ, PBERG_PURE="1")
    pure = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                          check=True).stdout.split()
    fast = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                          check=True).stdout.split()
    assert pure[0] == "python" and fast[0] == _kernels.BACKEND
    assert float(pure[1]) == pytest.approx(float(fast[1]), rel=1e-10)
