"""Families of weighted domains over a parameter disk.

A family is either a Hartogs family ``Omega_t = {|z| < exp(-u(t))}`` or a
product ``D x Omega``, with a weight ``phi(t, z)``.  Fiberwise the relevant
pseudonorm is ``|f|_m = (int |f|^(2/m) exp(-phi_t))^(m/2)``, the p-norm with
``p = 2/m``, so fiber kernels and dual norms reuse :mod:`pberg.extremal`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import RectBivariateSpline, RegularGridInterpolator

from ._design import DenseDesign
from ._parallel import pmap
from ._solver import SolverOptions, constrained_quadratic, minimize_pnorm
from . import _kernels
from .basis import HoloFunction, TruncatedBasis
from .domains import Domain, QuadratureRule, build_quadrature, disk, hartogs_fiber, scale_rule
from .extremal import (DomainPointError, Weight, default_tol, functional_min_norm, p_extremal)


class FamilyError(ValueError):
    pass


@dataclass(frozen=True)
class DomainFamily:
    """Hartogs (``u`` given) or product (``fiber_domain`` given) family.

    ``u`` maps a complex array of parameters to reals; ``phi(t, z)`` maps a
    parameter array (or scalar) and an (N, n) fiber-point array to N reals.
    """

    m: int = 1
    u: Optional[Callable] = None
    fiber_domain: Optional[Domain] = None
    phi: Optional[Callable] = None
    parameter_center: complex = 0j
    parameter_radius: float = 1.0
    declared_psh: bool = True
    name: str = ""

    def __post_init__(self):
        if (self.u is None) == (self.fiber_domain is None):
            raise FamilyError("give exactly one of u (Hartogs family) or fiber_domain (product)")
        if self.m < 1:
            raise FamilyError("m must be a positive integer")
        if not self.parameter_radius > 0:
            raise FamilyError("parameter radius must be positive")

    @property
    def p(self) -> float:
        return 2.0 / self.m

    @property
    def kind(self) -> str:
        return "hartogs" if self.u is not None else "product"

    @property
    def fiber_dim(self) -> int:
        return 1 if self.u is not None else self.fiber_domain.dim

    def parameter_domain(self) -> Domain:
        return disk(self.parameter_radius, self.parameter_center)

    def in_parameter_domain(self, t) -> bool:
        return abs(complex(t) - self.parameter_center) < self.parameter_radius

    def fiber_radius(self, t):
        return np.exp(-np.real(self.u(np.asarray(t))))

    def fiber(self, t) -> Domain:
        if self.u is not None:
            return hartogs_fiber(float(self.fiber_radius(complex(t))))
        return self.fiber_domain

    def weight(self, t) -> Weight:
        if self.phi is None:
            return Weight()
        phi = self.phi
        return Weight(lambda z: phi(complex(t), z), name=f"phi(t={complex(t)})")


@lru_cache(maxsize=32)
def _unit_fiber_rule(resolution: int) -> QuadratureRule:
    return build_quadrature(disk(1.0), resolution)


@lru_cache(maxsize=32)
def _product_rule(domain: Domain, resolution: int) -> QuadratureRule:
    return build_quadrature(domain, resolution)


def fiber_rule(family: DomainFamily, t, resolution: int) -> QuadratureRule:
    """Fiber quadrature with a t-independent node count."""
    if family.u is not None:
        return scale_rule(_unit_fiber_rule(resolution), float(family.fiber_radius(complex(t))))
    return _product_rule(family.fiber_domain, resolution)


def _check_t(family, t):
    if not family.in_parameter_domain(t):
        raise FamilyError(f"parameter {complex(t)} is outside the parameter disk")


def fiber_extremal(family: DomainFamily, t, z, basis: TruncatedBasis, resolution: int,
                   opts: Optional[SolverOptions] = None):
    _check_t(family, t)
    fib = family.fiber(t)
    zz = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    if not fib.contains(zz.reshape(1, -1))[0]:
        raise DomainPointError(f"z={zz.tolist()} is not inside the fiber over t={complex(t)}")
    rule = fiber_rule(family, t, resolution)
    return p_extremal(basis, rule, family.weight(t), family.p, zz, opts)


def fiber_kernel(family: DomainFamily, t, z, basis: TruncatedBasis, resolution: int,
                 opts: Optional[SolverOptions] = None) -> float:
    """Relative twisted 2/m-Bergman kernel K_{m,t}(z) on the truncated fiber space."""
    return fiber_extremal(family, t, z, basis, resolution, opts).kernel_value


# -- plurisubharmonicity probes ---------------------------------------------------


class TabulatedField:
    """Real field on a rectangular parameter grid, values[i, j] at xs[i] + 1j*ys[j]."""

    def __init__(self, xs, ys, values):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (self.xs.size, self.ys.size):
            raise ValueError("values must have shape (len(xs), len(ys))")
        if np.all(np.isfinite(self.values)) and min(self.xs.size, self.ys.size) >= 4:
            spline = RectBivariateSpline(self.xs, self.ys, self.values, kx=3, ky=3)
            self._interp = lambda x, y: spline.ev(x, y)
        else:
            rgi = RegularGridInterpolator((self.xs, self.ys), self.values, method="linear")
            self._interp = lambda x, y: rgi(np.stack([x, y], axis=-1))

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t)
        return ((t.real >= self.xs[0]) & (t.real <= self.xs[-1])
                & (t.imag >= self.ys[0]) & (t.imag <= self.ys[-1]))

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        return np.asarray(self._interp(t.real.ravel(), t.imag.ravel())).reshape(t.shape)


def tabulate(fn: Callable, center: complex, half_width: float, n: int,
             threads: Optional[int] = None) -> TabulatedField:
    """Evaluate ``fn(t)`` on an n x n grid centered at ``center`` (independent tasks)."""
    xs = center.real + np.linspace(-half_width, half_width, n)
    ys = center.imag + np.linspace(-half_width, half_width, n)
    pts = [complex(x, y) for x in xs for y in ys]
    vals = pmap(fn, pts, threads)
    return TabulatedField(xs, ys, np.array(vals, dtype=float).reshape(n, n))


@dataclass
class ProbeRow:
    center: complex
    radius: float
    field_center: float
    circle_mean: float
    margin: float
    violated: bool
    tol: float


@dataclass
class ProbeReport:
    rows: list
    skipped: int
    tol: float

    @property
    def violations(self) -> int:
        return sum(r.violated for r in self.rows)

    @property
    def margins(self) -> np.ndarray:
        return np.array([r.margin for r in self.rows])


def psh_probe(field, centers: Sequence, radii: Sequence[float], tol: float,
              n_angles: int = 128, parameter_domain: Optional[Domain] = None) -> ProbeReport:
    """Sub-mean-value test: flag field(c) > mean over the circle |t - c| = r, plus tol.

    ``field`` is a :class:`TabulatedField` or a vectorized callable.  Circles
    leaving the tabulated grid or the parameter domain are skipped and counted.
    """
    if n_angles < 64:
        raise ValueError("use at least 64 angles per circle")
    ang = np.exp(2j * np.pi * np.arange(n_angles) / n_angles)
    rows, skipped = [], 0
    for c in centers:
        c = complex(c)
        for r in radii:
            if not r > 0:
                raise ValueError("probe radii must be positive")
            circle = c + r * ang
            if parameter_domain is not None and not np.all(
                    parameter_domain.contains(circle.reshape(-1, 1))):
                skipped += 1
                continue
            if isinstance(field, TabulatedField) and not np.all(field.contains(circle)):
                skipped += 1
                continue
            fc = float(np.asarray(field(np.array([c])), dtype=float).reshape(-1)[0])
            vals = np.asarray(field(circle), dtype=float).reshape(-1)
            mean = float(np.mean(vals))
            if np.isneginf(fc):
                margin = np.inf if mean > -np.inf else 0.0
            else:
                margin = mean - fc
            rows.append(ProbeRow(c, float(r), fc, mean, float(margin), bool(fc > mean + tol), tol))
    return ProbeReport(rows, skipped, tol)


def probe_tolerance(rule: QuadratureRule, solver_tol: Optional[float] = None) -> float:
    """3 x (quadrature error + solver tol); the field is a log, so relative errors carry over."""
    st = default_tol(rule) if solver_tol is None else solver_tol
    return 3.0 * (rule.est_error + st)


# -- dual norms of holomorphic functionals ------------------------------------------


@dataclass(frozen=True)
class HoloFunctional:
    """Finite atomic functional f -> sum_j c_j(t) f(z_j(t)).

    ``atoms`` holds ``(point_path, coefficient_path)`` pairs of callables of t.
    """

    atoms: tuple = ()

    @classmethod
    def delta(cls, z, coefficient=1.0) -> "HoloFunctional":
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        return cls(((lambda t, z=z: z, lambda t, c=complex(coefficient): c),))

    def row(self, t, basis: TruncatedBasis, fiber: Domain) -> np.ndarray:
        v = np.zeros(len(basis), dtype=np.complex128)
        for point_path, coeff_path in self.atoms:
            z = np.atleast_1d(np.asarray(point_path(t), dtype=np.complex128)).reshape(1, -1)
            if not fiber.contains(z)[0]:
                raise DomainPointError(f"atom point {z.ravel().tolist()} leaves the fiber at t={t}")
            v += complex(coeff_path(t)) * basis.evaluate(z)[0]
        return v


@dataclass
class DualNormResult:
    value: float
    converged: bool
    tol: float


def dual_norm(family: DomainFamily, xi: HoloFunctional, t, basis: TruncatedBasis,
              resolution: int, opts: Optional[SolverOptions] = None, full: bool = False):
    """sup |xi(f)| over truncated fiber functions with |f|_m <= 1.

    Equivalent to 1 / min{|f|_m : xi(f) = 1}; closed form through the Gram
    matrix when m = 1.
    """
    _check_t(family, t)
    rule = fiber_rule(family, t, resolution)
    tol = (opts.tol if opts and opts.tol is not None else default_tol(rule))
    v = xi.row(t, basis, family.fiber(t))
    if not xi.atoms or not np.any(v):
        res = DualNormResult(0.0, True, tol)
        return res if full else res.value
    weight = family.weight(t)
    if family.m == 1:
        from ._design import make_design
        G = make_design(basis, rule).gram(weight.node_weights(rule))
        _, value = constrained_quadratic(G, v.reshape(1, -1), np.ones(1))
        res = DualNormResult(1.0 / math.sqrt(value), True, tol)
    else:
        norm, _, info = functional_min_norm(basis, rule, weight, family.p, v, opts)
        res = DualNormResult(1.0 / norm, info.converged, tol)
    return res if full else res.value


# -- minimal extension from the central fiber -----------------------------------------


@dataclass
class JointExpansion:
    """U(t, z) = sum_{a, b} coeffs[a, b] t^a z^b."""

    coeffs: np.ndarray

    @property
    def degrees(self):
        return self.coeffs.shape[0] - 1, self.coeffs.shape[1] - 1

    def design(self, t, z) -> np.ndarray:
        dt, dz = self.degrees
        return joint_design(np.asarray(t), np.asarray(z), dt, dz)

    def __call__(self, t, z):
        return self.design(t, z) @ self.coeffs.ravel()

    def to_json(self) -> dict:
        dt, dz = self.degrees
        return {"degrees": [dt, dz], "layout": "row-major (t-degree, z-degree)",
                "coeffs": [[float(v.real), float(v.imag)] for v in self.coeffs.ravel()]}


def joint_design(t, z, dt: int, dz: int) -> np.ndarray:
    tp = np.asarray(t)[:, None] ** np.arange(dt + 1)[None, :]
    zp = np.asarray(z)[:, None] ** np.arange(dz + 1)[None, :]
    return (tp[:, :, None] * zp[:, None, :]).reshape(t.shape[0], -1)


@dataclass
class JointRule:
    t: np.ndarray
    z: np.ndarray
    weights: np.ndarray
    est_error: float


def joint_rule(family: DomainFamily, resolution: int) -> JointRule:
    """Product rule on {(t, z): |t| < 1, z in Omega_t}; fiber rules rescaled per t-node."""
    if family.fiber_dim != 1:
        raise FamilyError("minimal extension is implemented for one-dimensional fibers")
    trule = build_quadrature(disk(1.0), resolution)
    tn = trule.nodes[:, 0]
    if family.u is not None:
        base = _unit_fiber_rule(resolution)
        R = family.fiber_radius(tn)
        z = (R[:, None] * base.nodes[:, 0][None, :]).ravel()
        w = (trule.weights[:, None] * (R ** 2)[:, None] * base.weights[None, :]).ravel()
        est = trule.est_error + base.est_error
    else:
        frule = _product_rule(family.fiber_domain, resolution)
        z = np.tile(frule.nodes[:, 0], tn.shape[0])
        w = np.outer(trule.weights, frule.weights).ravel()
        est = trule.est_error + frule.est_error
        R = None
    t = np.repeat(tn, z.shape[0] // tn.shape[0])
    return JointRule(t, z, w, est)


def _joint_weights(family, jr: JointRule) -> np.ndarray:
    if family.phi is None:
        return jr.weights
    vals = np.asarray(family.phi(jr.t, jr.z.reshape(-1, 1)), dtype=float).reshape(-1)
    if not np.all(np.isfinite(vals)):
        raise FamilyError("weight is not finite on joint quadrature nodes")
    return jr.weights * np.exp(-vals)


@dataclass
class ExtensionResult:
    U: JointExpansion
    total: float
    fiber_value: float
    ratio: float
    converged: bool
    tol: float
    diagnostics: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"total": self.total, "fiber_value": self.fiber_value, "ratio": self.ratio,
                "converged": self.converged, "tol": self.tol, "U": self.U.to_json(),
                "diagnostics": list(self.diagnostics)}


def extension_total(family: DomainFamily, U: JointExpansion, resolution: int) -> float:
    """int_Omega |U|^(2/m) exp(-phi) by the joint product rule."""
    jr = joint_rule(family, resolution)
    vals = np.abs(U(jr.t, jr.z)) ** family.p * _joint_weights(family, jr)
    return _kernels.neumaier_sum(np.ascontiguousarray(vals))


def central_fiber_value(family: DomainFamily, u: HoloFunction, resolution: int) -> float:
    rule = fiber_rule(family, 0j, resolution)
    vals = np.abs(u(rule.nodes)) ** family.p * family.weight(0j).node_weights(rule)
    return _kernels.neumaier_sum(np.ascontiguousarray(vals))


def minimal_extension(family: DomainFamily, u: HoloFunction, degrees=(6, 6), resolution: int = 12,
                      opts: Optional[SolverOptions] = None) -> ExtensionResult:
    """Minimize int_Omega |U|^(2/m) exp(-phi) over U with U(0, .) = u.

    Returns the minimizer, the total integral, the central fiber integral
    ``int_{Omega_0} |u|^(2/m) exp(-phi)`` and ``ratio = total / (pi * fiber)``.
    """
    if abs(family.parameter_center) > 0 or abs(family.parameter_radius - 1.0) > 0:
        raise FamilyError("minimal extension expects the unit parameter disk")
    if u.basis.dim != 1:
        raise FamilyError("u must be a function of one fiber variable")
    dt, dz = (int(d) for d in degrees)
    if np.any(u.coeffs[dz + 1:] != 0):
        raise FamilyError(f"u has degree above d_z={dz}: constraints are infeasible")
    opts = opts or SolverOptions()
    jr = joint_rule(family, resolution)
    w = _joint_weights(family, jr)
    design = DenseDesign(matrix=joint_design(jr.t, jr.z, dt, dz))
    K = (dt + 1) * (dz + 1)
    n_fixed = dz + 1
    C = np.zeros((n_fixed, K), dtype=np.complex128)
    C[np.arange(n_fixed), np.arange(n_fixed)] = 1.0    # coefficients of t^0 z^b
    b = np.zeros(n_fixed, dtype=np.complex128)
    b[:min(n_fixed, len(u.coeffs))] = u.coeffs[:n_fixed]
    tol = opts.tol if opts.tol is not None else max(1e-8, 10.0 * jr.est_error)
    c, total, info, _ = minimize_pnorm(design, w, family.p, C, b, opts, tol)
    U = JointExpansion(c.reshape(dt + 1, dz + 1))
    fiber_value = central_fiber_value(family, u, resolution)
    ratio = total / (math.pi * fiber_value)
    diagnostics = list(info.notes)
    return ExtensionResult(U, float(total), float(fiber_value), float(ratio), info.converged, tol,
                           diagnostics)
