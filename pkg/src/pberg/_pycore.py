"""Pure-numpy versions of the compiled kernels in ``_core.pyx``."""

import math

import numpy as np


def neumaier_sum(x):
    return math.fsum(np.asarray(x, dtype=np.float64))


def ring_accumulate(a, spec, sum_mode):
    a = np.asarray(a, dtype=np.float64)
    spec = np.asarray(spec, dtype=np.complex128)
    K = a.shape[1]
    M = spec.shape[1]
    k = np.arange(K)
    idx = (k[:, None] + k[None, :]) % M if sum_mode else (k[:, None] - k[None, :]) % M
    out = np.zeros((K, K), dtype=np.complex128)
    # chunk over rings to bound the (chunk, K, K) temporary
    step = max(1, int(4_000_000 // max(K * K, 1)))
    for s in range(0, a.shape[0], step):
        ai = a[s:s + step]
        outer = ai[:, :, None] * ai[:, None, :]
        out += np.einsum("ikl,ikl->kl", outer, spec[s:s + step][:, idx])
    return out


def monomial_design(points, exponents):
    points = np.asarray(points, dtype=np.complex128)
    exponents = np.asarray(exponents, dtype=np.int64)
    N, n = points.shape
    dmax = int(exponents.max()) if exponents.size else 0
    out = np.ones((N, exponents.shape[0]), dtype=np.complex128)
    for j in range(n):
        table = np.ones((N, dmax + 1), dtype=np.complex128)
        for e in range(1, dmax + 1):
            table[:, e] = table[:, e - 1] * points[:, j]
        out *= table[:, exponents[:, j]]
    return out
