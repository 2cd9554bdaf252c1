"""p-norms, Bergman kernels and p-Bergman kernels on truncated monomial spaces.

The p-Bergman kernel at z is ``sup |f(z)|^2 / ||f||_p^2``.  Normalizing
``f(z) = 1`` turns it into ``1 / min ||f||_p^2`` over the affine hyperplane
``{f : f(z) = 1}``, which is what :func:`p_extremal` solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from ._design import make_design
from ._parallel import pmap
from ._solver import (ConditioningError, SolverError, SolverOptions, constrained_quadratic,
                      minimize_pnorm)
from .basis import HoloFunction, TruncatedBasis, evaluate_basis
from .domains import Domain, QuadratureRule, as_points

__all__ = [
    "Weight", "ExtremalResult", "ProfilePoint", "pnorm", "gram_kernel", "p_extremal",
    "kernel_profile", "default_tol", "SolverOptions", "SolverError", "ConditioningError",
    "DomainPointError", "disk_kernel_closed_form", "functional_min_norm",
]


class DomainPointError(ValueError):
    """A requested point is not strictly inside the domain."""


@dataclass(frozen=True)
class Weight:
    """Plurisubharmonic weight phi; integrands carry exp(-phi).

    ``phi`` maps an (N, n) complex node array to N real values.
    """

    phi: Optional[Callable] = None
    name: str = "zero"

    @property
    def zero(self) -> bool:
        return self.phi is None

    def factors(self, nodes) -> np.ndarray:
        if self.phi is None:
            return np.ones(np.asarray(nodes).shape[0])
        vals = np.asarray(self.phi(np.asarray(nodes)), dtype=np.float64).reshape(-1)
        if np.any(np.isneginf(vals)) or np.any(np.isnan(vals)):
            raise ValueError(f"weight {self.name!r} is -inf or undefined on quadrature nodes")
        return np.exp(-vals)

    def node_weights(self, rule: QuadratureRule) -> np.ndarray:
        return rule.weights * self.factors(rule.nodes)


ZERO = Weight()


def default_tol(rule: QuadratureRule) -> float:
    return max(1e-8, 10.0 * rule.est_error)


@dataclass
class ExtremalResult:
    kernel_value: float
    extremal: HoloFunction
    iterations: int
    converged: bool
    stationarity: float
    degree: int
    p: float
    tol: float
    norm: float
    newton_steps: int = 0
    start_spread: float = 0.0
    diagnostics: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kernel_value": self.kernel_value,
            "norm": self.norm,
            "p": self.p,
            "degree": self.degree,
            "iterations": self.iterations,
            "newton_steps": self.newton_steps,
            "converged": self.converged,
            "stationarity": self.stationarity,
            "start_spread": self.start_spread,
            "tol": self.tol,
            "extremal": self.extremal.to_json(),
            "diagnostics": list(self.diagnostics),
        }


def pnorm(f: HoloFunction, p: float, rule: QuadratureRule, weight: Weight = ZERO) -> float:
    """(sum_k w_k |f(node_k)|^p exp(-phi(node_k)))^(1/p), compensated."""
    if not p > 0:
        raise ValueError("p must be positive")
    values = make_design(f.basis, rule).values(f.coeffs)
    vals = np.abs(values) ** p * weight.node_weights(rule)
    return _kernels.neumaier_sum(np.ascontiguousarray(vals)) ** (1.0 / p)


def _eval_vector(basis: TruncatedBasis, z) -> np.ndarray:
    v, _ = evaluate_basis(basis, z)
    if not np.all(np.isfinite(v)):
        raise DomainPointError("basis evaluation overflows: point is outside the numeric support")
    return v


def _check_inside(domain: Optional[Domain], z):
    if domain is not None and not domain.contains(as_points(z, domain.dim))[0]:
        raise DomainPointError(f"point {np.asarray(z).tolist()} is not inside the domain")


def gram_kernel(basis: TruncatedBasis, rule: QuadratureRule, weight: Weight = ZERO, z=0j,
                domain: Optional[Domain] = None, condition_cap: float = 1e13) -> float:
    """Diagonal of the reproducing kernel of the truncated weighted A^2 space: k^H G^-1 k."""
    _check_inside(domain, z)
    k = _eval_vector(basis, z)
    design = make_design(basis, rule)
    G = design.gram(weight.node_weights(rule))
    _, value = constrained_quadratic(G, k.reshape(1, -1), np.ones(1), condition_cap)
    # value is min c^H G c on {k.c = 1}, i.e. 1 / K(z)
    return 1.0 / value


def _solve_functional(basis, rule, weight, p, row, opts, tol):
    design = make_design(basis, rule)
    w = weight.node_weights(rule)
    c, objective, info, spread = minimize_pnorm(design, w, p, row.reshape(1, -1), np.ones(1),
                                                opts, tol)
    return c, objective, info, spread


def p_extremal(basis: TruncatedBasis, rule: QuadratureRule, weight: Weight = ZERO, p: float = 2.0,
               z=0j, opts: Optional[SolverOptions] = None,
               domain: Optional[Domain] = None) -> ExtremalResult:
    """Minimize ||f||_p subject to f(z) = 1; the p-Bergman kernel is ||f*||_p^-2."""
    if not p > 0:
        raise ValueError("p must be positive")
    opts = opts or SolverOptions()
    tol = opts.tol if opts.tol is not None else default_tol(rule)
    _check_inside(domain, z)
    k = _eval_vector(basis, z)
    c, objective, info, spread = _solve_functional(basis, rule, weight, p, k, opts, tol)
    c = c / (k @ c)
    f = HoloFunction(basis, c)
    norm = pnorm(f, p, rule, weight)
    diagnostics = list(info.notes)
    if not info.converged:
        diagnostics.append(f"stationarity {info.stationarity:.3e} above tol {tol:.1e}")
    return ExtremalResult(
        kernel_value=norm ** -2, extremal=f, iterations=info.iterations,
        converged=info.converged, stationarity=info.stationarity, degree=basis.degree, p=p,
        tol=tol, norm=norm, newton_steps=info.newton_steps, start_spread=spread,
        diagnostics=diagnostics)


def functional_min_norm(basis, rule, weight, p, row, opts=None):
    """min ||f||_p over {row . c = 1}; returns (norm, coeffs, SolveInfo)."""
    opts = opts or SolverOptions()
    tol = opts.tol if opts.tol is not None else default_tol(rule)
    c, objective, info, _ = _solve_functional(basis, rule, weight, p, np.asarray(row), opts, tol)
    f = HoloFunction(basis, c / (np.asarray(row) @ c))
    return pnorm(f, p, rule, weight), f, info


@dataclass
class ProfilePoint:
    point: np.ndarray
    kernel_value: float
    converged: bool
    increasing: Optional[bool]
    tol: float


def kernel_profile(domain: Domain, p: float, path: Sequence, basis: TruncatedBasis,
                   rule: QuadratureRule, weight: Weight = ZERO,
                   opts: Optional[SolverOptions] = None, threads: Optional[int] = None):
    """Kernel values along a path of interior points, with step-to-step monotonicity flags."""
    pts = [as_points(z, domain.dim)[0] for z in path]
    inside = domain.contains(np.array(pts))
    if not np.all(inside):
        bad = [np.asarray(pts[i]).tolist() for i in np.nonzero(~inside)[0]]
        raise DomainPointError(f"path points outside the domain: {bad}")

    def solve(z):
        if p == 2:
            tol = default_tol(rule)
            return gram_kernel(basis, rule, weight, z), True, tol
        res = p_extremal(basis, rule, weight, p, z, opts)
        return res.kernel_value, res.converged, res.tol

    results = pmap(solve, pts, threads)
    out = []
    prev = None
    for z, (val, conv, tol) in zip(pts, results):
        out.append(ProfilePoint(np.asarray(z), val, conv, None if prev is None else val > prev, tol))
        prev = val
    return out


def disk_kernel_closed_form(z, p=2.0, radius=1.0) -> float:
    """pi^(-2/p) R^(-4/p) (1 - |z/R|^2)^(-4/p): exact p-Bergman kernel of the disk of radius R."""
    a = abs(complex(z)) / radius
    return math.pi ** (-2.0 / p) * radius ** (-4.0 / p) * (1.0 - a * a) ** (-4.0 / p)
