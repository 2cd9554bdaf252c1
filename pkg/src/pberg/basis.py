"""Truncated monomial bases, holomorphic functions as coefficient vectors, projection."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from . import _kernels
from .domains import QuadratureRule, as_points

DEFAULT_DEGREE = {1: 30, 2: 12, 3: 8}


class BasisError(ValueError):
    pass


class SingularSystemError(BasisError):
    """Rank-deficient least-squares system; ``condition`` holds the estimate."""

    def __init__(self, message, condition):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


def graded_lex(dim: int, degree: int) -> np.ndarray:
    """Multi-indices with |alpha| <= degree, graded by total degree, lex-descending within."""
    out = []
    for total in range(degree + 1):
        block = [a for a in itertools.product(range(total, -1, -1), repeat=dim) if sum(a) == total]
        block.sort(reverse=True)
        out.extend(block)
    return np.array(out, dtype=np.int64).reshape(-1, dim)


@dataclass(frozen=True)
class TruncatedBasis:
    dim: int
    degree: int

    def __post_init__(self):
        if self.dim < 1 or self.degree < 0:
            raise BasisError("need dim >= 1 and degree >= 0")

    @cached_property
    def indices(self) -> np.ndarray:
        return graded_lex(self.dim, self.degree)

    def __len__(self):
        return self.indices.shape[0]

    @property
    def size(self) -> int:
        return len(self)

    def index_of(self, alpha) -> int:
        hits = np.nonzero(np.all(self.indices == np.asarray(alpha), axis=1))[0]
        if hits.size == 0:
            raise BasisError(f"multi-index {tuple(alpha)} not in basis")
        return int(hits[0])

    def evaluate(self, points) -> np.ndarray:
        """Design matrix ``Phi[i, k] = points[i] ** alpha_k`` (shape N x K)."""
        z = np.ascontiguousarray(as_points(points, self.dim))
        return _kernels.monomial_design(z, np.ascontiguousarray(self.indices))

    def gradient(self, points) -> np.ndarray:
        """``out[i, k, j] = d(z ** alpha_k) / dz_j`` at ``points[i]`` (shape N x K x n)."""
        z = as_points(points, self.dim)
        out = np.zeros((z.shape[0], len(self), self.dim), dtype=np.complex128)
        for j in range(self.dim):
            lowered = self.indices.copy()
            lowered[:, j] = np.maximum(lowered[:, j] - 1, 0)
            vals = _kernels.monomial_design(np.ascontiguousarray(z), np.ascontiguousarray(lowered))
            out[:, :, j] = vals * self.indices[:, j][None, :]
        return out


def evaluate_basis(basis: TruncatedBasis, point, with_gradient: bool = False):
    """Monomial values (and optionally complex gradients) at one point."""
    z = np.asarray(point, dtype=np.complex128).reshape(-1)
    if z.shape[0] != basis.dim:
        raise BasisError(f"point has dimension {z.shape[0]}, basis has {basis.dim}")
    values = basis.evaluate(z.reshape(1, -1))[0]
    if not with_gradient:
        return values, None
    return values, basis.gradient(z.reshape(1, -1))[0]


@dataclass(frozen=True)
class HoloFunction:
    """A holomorphic polynomial: coefficients over a truncated monomial basis."""

    basis: TruncatedBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128).reshape(-1)
        if c.shape[0] != len(self.basis):
            raise BasisError(f"expected {len(self.basis)} coefficients, got {c.shape[0]}")
        object.__setattr__(self, "coeffs", c)

    def __call__(self, points) -> np.ndarray:
        return self.basis.evaluate(points) @ self.coeffs

    def gradient(self, points) -> np.ndarray:
        return np.einsum("ikj,k->ij", self.basis.gradient(points), self.coeffs)

    def __add__(self, other: "HoloFunction") -> "HoloFunction":
        if other.basis != self.basis:
            raise BasisError("basis mismatch")
        return HoloFunction(self.basis, self.coeffs + other.coeffs)

    def __mul__(self, c) -> "HoloFunction":
        return HoloFunction(self.basis, self.coeffs * complex(c))

    __rmul__ = __mul__

    @classmethod
    def monomial(cls, basis: TruncatedBasis, alpha) -> "HoloFunction":
        c = np.zeros(len(basis), dtype=np.complex128)
        c[basis.index_of(alpha)] = 1.0
        return cls(basis, c)

    @classmethod
    def constant(cls, basis: TruncatedBasis, value=1.0) -> "HoloFunction":
        c = np.zeros(len(basis), dtype=np.complex128)
        c[0] = value
        return cls(basis, c)

    def to_json(self) -> dict:
        return {"dim": self.basis.dim, "degree": self.basis.degree, "ordering": "graded-lex",
                "coeffs": [[float(v.real), float(v.imag)] for v in self.coeffs]}

    @classmethod
    def from_json(cls, doc: dict) -> "HoloFunction":
        basis = TruncatedBasis(int(doc["dim"]), int(doc["degree"]))
        coeffs = np.array([complex(re, im) for re, im in doc["coeffs"]])
        return cls(basis, coeffs)


class WeightedLeastSquares:
    """Pivoted QR of sqrt(w) * Phi, reusable for many right-hand sides."""

    RCOND = 1e-13

    def __init__(self, design: np.ndarray, weights: np.ndarray):
        if design.shape[0] < design.shape[1]:
            raise SingularSystemError(
                f"{design.shape[0]} nodes cannot determine {design.shape[1]} coefficients", np.inf)
        self.sqrt_w = np.sqrt(weights)
        a = design * self.sqrt_w[:, None]
        self.q, self.r, self.perm = sla.qr(a, mode="economic", pivoting=True)
        diag = np.abs(np.diag(self.r))
        self.condition = float(diag[0] / diag[-1]) if diag[-1] > 0 else np.inf
        if not diag[-1] > self.RCOND * diag[0]:
            raise SingularSystemError("basis is rank-deficient on the node set", self.condition)

    def solve(self, samples: np.ndarray):
        y = np.asarray(samples, dtype=np.complex128)
        wy = y * (self.sqrt_w if y.ndim == 1 else self.sqrt_w[:, None])
        qty = self.q.conj().T @ wy
        sol = sla.solve_triangular(self.r, qty)
        coeffs = np.empty_like(sol)
        coeffs[self.perm] = sol
        fitted = self.q @ qty
        resid = np.linalg.norm(wy - fitted, axis=0)
        scale = np.linalg.norm(wy, axis=0)
        rel = np.where(scale > 0, resid / np.where(scale > 0, scale, 1.0), resid)
        return coeffs, rel


def project(samples, basis: TruncatedBasis, rule: QuadratureRule):
    """Quadrature-weighted least-squares fit of ``samples`` by the basis.

    ``samples`` is either a callable on an (N, n) node array or the tabulated
    values on ``rule.nodes``.  Returns ``(HoloFunction, relative L2 residual)``.
    """
    values = samples(rule.nodes) if callable(samples) else samples
    values = np.asarray(values, dtype=np.complex128).reshape(-1)
    if values.shape[0] != len(rule):
        raise BasisError("tabulated samples do not match the rule's node count")
    ls = WeightedLeastSquares(basis.evaluate(rule.nodes), rule.weights)
    coeffs, rel = ls.solve(values)
    return HoloFunction(basis, coeffs), float(rel)
