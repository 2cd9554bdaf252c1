"""Bounded model domains in C^n and quadrature rules for Lebesgue measure on them.

Points are stored as complex128 arrays of shape ``(N, n)``.  Quadrature
rules for disks, balls, ellipses and polydisks are product rules with
Gauss-Jacobi radial nodes and equispaced angles; indicator domains get a
masked midpoint rule on their bounding box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import roots_jacobi

from . import _kernels

MAX_DIM = 3
KINDS = ("disk", "ball", "ellipse", "polydisk", "indicator", "hartogs_fiber")


class DomainError(ValueError):
    """Invalid domain description or quadrature request."""


@dataclass(frozen=True)
class Domain:
    """A bounded domain in C^n.

    Only the fields relevant to ``kind`` are used; build instances with the
    helper constructors (:func:`disk`, :func:`ball`, ...).
    """

    kind: str
    dim: int = 1
    center: complex = 0j
    radius: float = 1.0
    semiaxes: tuple = (1.0, 1.0)
    radii: tuple = ()
    box: tuple = ()
    membership: Optional[Callable] = field(default=None, compare=False)
    simply_connected: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if not 1 <= self.dim <= MAX_DIM:
            raise DomainError(f"dimension must be between 1 and {MAX_DIM}, got {self.dim}")
        if self.kind in ("disk", "ball", "hartogs_fiber") and not self.radius > 0:
            raise DomainError("radius must be strictly positive")
        if self.kind == "ellipse" and not min(self.semiaxes) > 0:
            raise DomainError("semiaxes must be strictly positive")
        if self.kind == "polydisk":
            if len(self.radii) != self.dim or not min(self.radii) > 0:
                raise DomainError("polydisk needs one positive radius per coordinate")
        if self.kind == "indicator":
            if self.membership is None:
                raise DomainError("indicator domain needs a membership function")
            if len(self.box) != self.dim:
                raise DomainError("indicator box needs one (xmin, xmax, ymin, ymax) per coordinate")
            for b in self.box:
                if not (b[1] > b[0] and b[3] > b[2]):
                    raise DomainError("bounding box must have positive measure")

    # -- geometry ---------------------------------------------------------

    def contains(self, points) -> np.ndarray:
        """Vectorized membership test; ``points`` has shape (N, dim) or (dim,)."""
        z = as_points(points, self.dim)
        if self.kind in ("disk", "hartogs_fiber"):
            return np.abs(z[:, 0] - self.center) < self.radius
        if self.kind == "ball":
            return np.sum(np.abs(z) ** 2, axis=1) < self.radius ** 2
        if self.kind == "ellipse":
            a, b = self.semiaxes
            w = z[:, 0] - self.center
            return (w.real / a) ** 2 + (w.imag / b) ** 2 < 1.0
        if self.kind == "polydisk":
            return np.all(np.abs(z) < np.asarray(self.radii), axis=1)
        inside = np.asarray(self.membership(z), dtype=bool)
        lo = np.array([[b[0], b[2]] for b in self.box])
        hi = np.array([[b[1], b[3]] for b in self.box])
        xy = np.stack([z.real, z.imag], axis=2)
        return inside & np.all((xy > lo) & (xy < hi), axis=(1, 2))

    def bounding_box(self) -> tuple:
        """Per coordinate ``(xmin, xmax, ymin, ymax)``."""
        c = self.center
        if self.kind in ("disk", "hartogs_fiber"):
            r = self.radius
            return ((c.real - r, c.real + r, c.imag - r, c.imag + r),)
        if self.kind == "ball":
            r = self.radius
            return tuple((-r, r, -r, r) for _ in range(self.dim))
        if self.kind == "ellipse":
            a, b = self.semiaxes
            return ((c.real - a, c.real + a, c.imag - b, c.imag + b),)
        if self.kind == "polydisk":
            return tuple((-r, r, -r, r) for r in self.radii)
        return tuple(tuple(b) for b in self.box)

    def volume(self) -> float:
        """Exact Lebesgue volume where it is known in closed form, else NaN."""
        n = self.dim
        if self.kind in ("disk", "hartogs_fiber"):
            return math.pi * self.radius ** 2
        if self.kind == "ball":
            return math.pi ** n * self.radius ** (2 * n) / math.factorial(n)
        if self.kind == "ellipse":
            return math.pi * self.semiaxes[0] * self.semiaxes[1]
        if self.kind == "polydisk":
            return math.prod(math.pi * r * r for r in self.radii)
        return float("nan")

    def scaled(self, r: float) -> "Domain":
        """The image of the domain under z -> r z."""
        if not r > 0:
            raise DomainError("scale factor must be positive")
        if self.kind == "indicator":
            inner = self.membership
            box = tuple((b[0] * r, b[1] * r, b[2] * r, b[3] * r) for b in self.box)
            return Domain("indicator", dim=self.dim, box=box,
                          membership=lambda z: inner(np.asarray(z) / r),
                          simply_connected=self.simply_connected)
        return Domain(self.kind, dim=self.dim, center=self.center * r, radius=self.radius * r,
                      semiaxes=tuple(s * r for s in self.semiaxes),
                      radii=tuple(s * r for s in self.radii),
                      simply_connected=self.simply_connected)

    def interior_center(self) -> np.ndarray:
        if self.kind == "indicator":
            return np.array([complex((b[0] + b[1]) / 2, (b[2] + b[3]) / 2) for b in self.box])
        return np.full(self.dim, self.center if self.dim == 1 else 0j, dtype=complex)


def disk(radius=1.0, center=0j) -> Domain:
    return Domain("disk", dim=1, center=complex(center), radius=float(radius))


def ball(dim=2, radius=1.0) -> Domain:
    if dim == 1:
        return disk(radius)
    return Domain("ball", dim=dim, radius=float(radius))


def ellipse(a, b, center=0j) -> Domain:
    return Domain("ellipse", dim=1, center=complex(center), semiaxes=(float(a), float(b)))


def polydisk(radii: Sequence[float]) -> Domain:
    radii = tuple(float(r) for r in radii)
    return Domain("polydisk", dim=len(radii), radii=radii)


def hartogs_fiber(radius) -> Domain:
    return Domain("hartogs_fiber", dim=1, radius=float(radius))


def indicator(box, membership, simply_connected=False) -> Domain:
    box = tuple(tuple(float(v) for v in b) for b in box)
    return Domain("indicator", dim=len(box), box=box, membership=membership,
                  simply_connected=simply_connected)


def as_points(points, dim: int) -> np.ndarray:
    z = np.asarray(points, dtype=np.complex128)
    if z.ndim == 0:
        z = z.reshape(1, 1)
    elif z.ndim == 1:
        z = z.reshape(1, -1) if z.shape[0] == dim else z.reshape(-1, 1)
    if z.shape[1] != dim:
        raise DomainError(f"expected points of dimension {dim}, got {z.shape[1]}")
    return z


# -- quadrature -------------------------------------------------------------


@dataclass(frozen=True)
class Rings:
    """Polar layout of a centered one-dimensional rule.

    Node ``i * n_angles + j`` sits at ``radii[i] * exp(2j*pi*j/n_angles)``.
    """

    radii: np.ndarray
    n_angles: int


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    est_error: float
    rings: Optional[Rings] = None

    def __post_init__(self):
        if self.nodes.shape[0] != self.weights.shape[0]:
            raise DomainError("nodes and weights differ in length")
        if not np.all(self.weights > 0):
            raise DomainError("quadrature weights must be positive")

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def __len__(self):
        return self.weights.shape[0]

    def integrate(self, values) -> float:
        """Compensated weighted sum of real nodal values."""
        v = np.asarray(values, dtype=np.float64) * self.weights
        return _kernels.neumaier_sum(np.ascontiguousarray(v))

    def integrate_complex(self, values) -> complex:
        v = np.asarray(values, dtype=np.complex128) * self.weights
        return complex(_kernels.neumaier_sum(np.ascontiguousarray(v.real)),
                       _kernels.neumaier_sum(np.ascontiguousarray(v.imag)))

    def total_weight(self) -> float:
        return _kernels.neumaier_sum(np.ascontiguousarray(self.weights))


def _radial_disk(n: int, radius: float):
    """Nodes/weights for int_0^R h(r) r dr, exact for polynomial h of degree 2n-1."""
    x, w = roots_jacobi(n, 0.0, 1.0)
    r = radius * (1.0 + x) / 2.0
    return r, w * (radius / 2.0) ** 2


def _angles(m: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(m) / m


def _disk_rule(n_rad: int, n_ang: int, radius: float, center: complex):
    r, wr = _radial_disk(n_rad, radius)
    e = np.exp(1j * _angles(n_ang))
    nodes = (r[:, None] * e[None, :]).ravel() + center
    weights = np.repeat(wr * (2.0 * np.pi / n_ang), n_ang)
    return nodes.reshape(-1, 1), weights, r


def _simplex_ball(dim: int, n_rad: int, n_ang: int, radius: float):
    """Ball in C^n via s_j = |z_j|^2 on the simplex sum s_j < R^2 (collapsed Gauss-Jacobi)."""
    coords = []
    for j in range(dim):
        alpha = dim - 1 - j
        x, w = roots_jacobi(n_rad, float(alpha), 0.0)
        u = (1.0 + x) / 2.0
        coords.append((u, w * 0.5 ** (alpha + 1)))
    grids = np.meshgrid(*[c[0] for c in coords], indexing="ij")
    wgrid = np.ones_like(grids[0])
    for j, c in enumerate(coords):
        shape = [1] * dim
        shape[j] = -1
        wgrid = wgrid * c[1].reshape(shape)
    u = [g.ravel() for g in grids]
    ws = wgrid.ravel()
    s = np.empty((ws.shape[0], dim))
    rest = np.full(ws.shape[0], radius ** 2)
    for j in range(dim):
        s[:, j] = rest * u[j]
        rest = rest * (1.0 - u[j])
    ws = ws * radius ** (2 * dim)
    ang = _angles(n_ang)
    angle_grid = np.stack(np.meshgrid(*([ang] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    phases = np.exp(1j * angle_grid)
    nodes = (np.sqrt(s)[:, None, :] * phases[None, :, :]).reshape(-1, dim)
    weights = np.repeat(ws * (0.5 * 2.0 * np.pi / n_ang) ** dim, phases.shape[0])
    return nodes, weights


def _product(rules):
    nodes, weights = rules[0]
    for nd, wt in rules[1:]:
        m = weights.shape[0]
        nodes = np.concatenate([np.repeat(nodes, nd.shape[0], axis=0), np.tile(nd, (m, 1))], axis=1)
        weights = np.repeat(weights, wt.shape[0]) * np.tile(wt, m)
    return nodes, weights


def _raw_rule(domain: Domain, resolution: int):
    """(nodes, weights, rings) at a given resolution, without error estimate."""
    n = domain.dim
    kind = domain.kind
    if kind in ("disk", "hartogs_fiber"):
        nodes, weights, r = _disk_rule(resolution, 2 * resolution, domain.radius, domain.center)
        rings = Rings(r, 2 * resolution) if domain.center == 0 else None
        return nodes, weights, rings
    if kind == "ellipse":
        a, b = domain.semiaxes
        nodes, weights, _ = _disk_rule(resolution, 2 * resolution, 1.0, 0j)
        z = nodes[:, 0]
        mapped = a * z.real + 1j * b * z.imag + domain.center
        return mapped.reshape(-1, 1), weights * a * b, None
    n_rad = max(2, resolution // n)
    if kind == "ball":
        nodes, weights = _simplex_ball(n, n_rad, resolution, domain.radius)
        return nodes, weights, None
    if kind == "polydisk":
        parts = []
        for rad in domain.radii:
            nd, wt, _ = _disk_rule(n_rad, resolution, rad, 0j)
            parts.append((nd, wt))
        nodes, weights = _product(parts)
        return nodes, weights, None
    return _masked_midpoint(domain, resolution) + (None,)


def _masked_midpoint(domain: Domain, resolution: int):
    axes = []
    cell = 1.0
    for b in domain.box:
        for lo, hi in ((b[0], b[1]), (b[2], b[3])):
            h = (hi - lo) / resolution
            axes.append(lo + h * (np.arange(resolution) + 0.5))
            cell *= h
    grids = np.meshgrid(*axes, indexing="ij")
    flat = [g.ravel() for g in grids]
    pts = np.stack([flat[2 * j] + 1j * flat[2 * j + 1] for j in range(domain.dim)], axis=1)
    keep = domain.contains(pts)
    if not np.any(keep):
        raise DomainError("indicator domain has zero sampled measure at this resolution")
    pts = pts[keep]
    return pts, np.full(pts.shape[0], cell)


def _probe_integrand(domain: Domain, nodes: np.ndarray) -> np.ndarray:
    """Fixed smooth non-polynomial integrand used for the refinement estimate."""
    box = domain.bounding_box()
    scale = max(max(b[1] - b[0], b[3] - b[2]) for b in box) / 2.0
    c = domain.interior_center()
    w = (nodes - c) / scale
    return np.exp(0.3 * np.sum(w.real, axis=1) - 0.2 * np.sum(w.imag, axis=1)) * (
        1.0 + 0.5 * np.cos(np.sum(np.abs(w) ** 2, axis=1)))


def build_quadrature(domain: Domain, resolution: int) -> QuadratureRule:
    """Quadrature rule for int_domain (.) d(lambda_n).

    ``est_error`` is the relative difference between this rule and the one at
    ``resolution // 2`` on a smooth test integrand (floored at rounding level).
    """
    if resolution < 4:
        raise DomainError("resolution must be at least 4")
    nodes, weights, rings = _raw_rule(domain, resolution)
    coarse_nodes, coarse_weights, _ = _raw_rule(domain, max(2, resolution // 2))
    fine = _kernels.neumaier_sum(np.ascontiguousarray(weights * _probe_integrand(domain, nodes)))
    coarse = _kernels.neumaier_sum(
        np.ascontiguousarray(coarse_weights * _probe_integrand(domain, coarse_nodes)))
    est = abs(fine - coarse) / abs(fine)
    est = max(est, 4.0 * np.finfo(float).eps * math.sqrt(weights.shape[0]))
    return QuadratureRule(np.ascontiguousarray(nodes), np.ascontiguousarray(weights), float(est), rings)


def scale_rule(rule: QuadratureRule, r: float) -> QuadratureRule:
    """Push a rule forward under z -> r z (weights pick up r^(2n))."""
    n = rule.dim
    rings = None if rule.rings is None else Rings(rule.rings.radii * r, rule.rings.n_angles)
    return QuadratureRule(rule.nodes * r, rule.weights * r ** (2 * n), rule.est_error, rings)
