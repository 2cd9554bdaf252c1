"""Linear maps from coefficient vectors to nodal values, with weighted Gram assembly.

Two implementations share one interface:

* ``DenseDesign`` keeps the N x K design matrix and uses BLAS.
* ``RingDesign`` exploits a centered polar rule in one variable: on each ring
  the monomials are Fourier modes, so evaluation is an FFT per ring and Gram
  matrices are ring sums of Toeplitz/Hankel slices of the weight spectrum
  (``_kernels.ring_accumulate``).  Memory is O(rings x K) instead of O(N x K).
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .basis import TruncatedBasis
from .domains import QuadratureRule


class DenseDesign:
    def __init__(self, basis: TruncatedBasis = None, rule: QuadratureRule = None, matrix=None):
        self.basis = basis
        self.matrix = basis.evaluate(rule.nodes) if matrix is None else np.asarray(matrix)
        self.n_nodes, self.size = self.matrix.shape

    def values(self, c):
        return self.matrix @ c

    def adjoint(self, y):
        return self.matrix.conj().T @ y

    def gram(self, rho):
        """sum_i rho_i conj(Phi_ik) Phi_il."""
        return self.matrix.conj().T @ (rho[:, None] * self.matrix)

    def bigram(self, sigma):
        """sum_i sigma_i Phi_ik Phi_il."""
        return self.matrix.T @ (sigma[:, None] * self.matrix)


class RingDesign:
    def __init__(self, basis: TruncatedBasis, rule: QuadratureRule):
        if basis.dim != 1 or rule.rings is None:
            raise ValueError("ring design needs a one-variable basis and a polar rule")
        self.basis = basis
        self.size = len(basis)
        self.n_rings = rule.rings.radii.shape[0]
        self.n_angles = rule.rings.n_angles
        self.n_nodes = self.n_rings * self.n_angles
        k = np.arange(self.size)
        with np.errstate(under="ignore"):
            self.powers = np.ascontiguousarray(rule.rings.radii[:, None] ** k[None, :])
        self._fold = k % self.n_angles

    def _grid(self, y):
        return np.asarray(y).reshape(self.n_rings, self.n_angles)

    def values(self, c):
        spectrum = np.zeros((self.n_rings, self.n_angles), dtype=np.complex128)
        if self.size <= self.n_angles:
            spectrum[:, :self.size] = self.powers * c[None, :]
        else:
            np.add.at(spectrum, (slice(None), self._fold), self.powers * c[None, :])
        return (np.fft.ifft(spectrum, axis=1) * self.n_angles).ravel()

    def adjoint(self, y):
        spec = np.fft.fft(self._grid(y), axis=1)
        return np.sum(self.powers * spec[:, self._fold], axis=0)

    def gram(self, rho):
        spec = np.ascontiguousarray(np.fft.fft(self._grid(rho).astype(np.complex128), axis=1))
        return _kernels.ring_accumulate(self.powers, spec, False)

    def bigram(self, sigma):
        spec = np.ascontiguousarray(
            np.fft.ifft(self._grid(sigma).astype(np.complex128), axis=1) * self.n_angles)
        return _kernels.ring_accumulate(self.powers, spec, True)


def make_design(basis: TruncatedBasis, rule: QuadratureRule, dense: bool = False):
    if basis.dim != rule.dim:
        raise ValueError(f"basis dimension {basis.dim} does not match rule dimension {rule.dim}")
    if not dense and rule.rings is not None and basis.dim == 1:
        return RingDesign(basis, rule)
    return DenseDesign(basis, rule)
