"""Isometries of truncated A^p spaces induced by biholomorphisms, and the inverse problem.

A biholomorphism ``f: Omega_1 -> Omega_2`` acts on A^p by pullback,
``psi -> (psi o f) * J_f^(2/p)``.  In coefficients this is a K1 x K2 matrix
whose columns are least-squares projections of the pulled-back monomials.

Going back, the map is recovered as a ratio of images:
``F = (P(w_1), ..., P(w_n)) / P(1)`` where ``P`` is the pullback action.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, minimum_spanning_tree
from scipy.spatial import cKDTree

from .basis import HoloFunction, TruncatedBasis, WeightedLeastSquares
from .domains import Domain, QuadratureRule, as_points
from .extremal import pnorm

PULLBACK = "pullback"
FORWARD = "forward"


class IsometryError(ValueError):
    pass


class BranchError(IsometryError):
    """J_f^(2/p) has no continuous branch on the node set."""


class ConditioningError(IsometryError):
    def __init__(self, message, condition):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class ProjectionError(IsometryError):
    pass


def integer_power(p: float) -> Optional[int]:
    """m when p == 2/m for a positive integer m, else None."""
    m = 2.0 / p
    r = round(m)
    return int(r) if r >= 1 and abs(m - r) < 1e-12 else None


@dataclass
class IsometryOperator:
    matrix: np.ndarray
    p: float
    source_basis: TruncatedBasis
    target_basis: TruncatedBasis
    direction: str = PULLBACK
    projection_residual: float = 0.0
    column_residuals: Optional[np.ndarray] = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        if self.matrix.shape != (len(self.target_basis), len(self.source_basis)):
            raise IsometryError(
                f"matrix shape {self.matrix.shape} does not match bases "
                f"({len(self.target_basis)}, {len(self.source_basis)})")
        if self.direction not in (PULLBACK, FORWARD):
            raise IsometryError(f"unknown direction tag {self.direction!r}")

    def apply(self, psi: HoloFunction) -> HoloFunction:
        if psi.basis != self.source_basis:
            raise IsometryError("function is not expressed in the operator's source basis")
        return HoloFunction(self.target_basis, self.matrix @ psi.coeffs)

    def __matmul__(self, other: "IsometryOperator") -> "IsometryOperator":
        """Composition ``self o other`` (apply ``other`` first)."""
        if other.target_basis != self.source_basis or other.p != self.p:
            raise IsometryError("operators do not compose")
        return IsometryOperator(self.matrix @ other.matrix, self.p, other.source_basis,
                                self.target_basis, self.direction,
                                self.projection_residual + other.projection_residual)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "direction": self.direction,
            "source": {"dim": self.source_basis.dim, "degree": self.source_basis.degree},
            "target": {"dim": self.target_basis.dim, "degree": self.target_basis.degree},
            "ordering": "graded-lex",
            "rows": self.matrix.shape[0],
            "cols": self.matrix.shape[1],
            "projection_residual": self.projection_residual,
            "entries": [[float(v.real), float(v.imag)] for v in self.matrix.ravel()],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "IsometryOperator":
        src = TruncatedBasis(int(doc["source"]["dim"]), int(doc["source"]["degree"]))
        tgt = TruncatedBasis(int(doc["target"]["dim"]), int(doc["target"]["degree"]))
        entries = np.array([complex(a, b) for a, b in doc["entries"]])
        mat = entries.reshape(int(doc["rows"]), int(doc["cols"]))
        return cls(mat, float(doc["p"]), src, tgt, doc.get("direction", PULLBACK),
                   float(doc.get("projection_residual", 0.0)))


def _jacobian_det(jac, nodes):
    J = np.asarray(jac(nodes), dtype=np.complex128)
    if J.ndim == 3:
        J = np.linalg.det(J)
    return J.reshape(-1)


def _bridges(pts, rows, cols, d):
    """Shortest edges joining the components of a kNN graph, so the spanning tree is global.

    Dense polar rules make kNN graphs split into rings; each bridge is the
    closest pair between the component holding node 0 and the rest.
    """
    n = pts.shape[0]
    er, ec, ed = [], [], []
    while True:
        g = coo_matrix((np.ones(len(rows) + len(er)),
                        (np.concatenate([rows, er]).astype(int),
                         np.concatenate([cols, ec]).astype(int))), shape=(n, n))
        ncomp, labels = connected_components(g, directed=False)
        if ncomp == 1:
            return np.array(er, dtype=int), np.array(ec, dtype=int), np.array(ed)
        inside = np.nonzero(labels == labels[0])[0]
        outside = np.nonzero(labels != labels[0])[0]
        dist, j = cKDTree(pts[outside]).query(pts[inside])
        i = int(np.argmin(dist))
        er.append(inside[i])
        ec.append(outside[j[i]])
        ed.append(dist[i] + 1e-300)


def _continuous_log(J: np.ndarray, nodes: np.ndarray, anchor: int, neighbors: int = 8):
    """log J continued from the anchor node along a minimum spanning tree.

    Every remaining near-neighbour edge is checked for consistency; a 2*pi jump
    there means J winds around 0 on the node set.
    """
    pts = np.concatenate([nodes.real, nodes.imag], axis=1)
    k = min(neighbors + 1, pts.shape[0])
    dist, idx = cKDTree(pts).query(pts, k=k)
    rows = np.repeat(np.arange(pts.shape[0]), k - 1)
    cols = idx[:, 1:].ravel()
    d = dist[:, 1:].ravel() + 1e-300
    er, ec, ed = _bridges(pts, rows, cols, d)
    graph = coo_matrix((np.concatenate([d, ed]), (np.concatenate([rows, er]),
                        np.concatenate([cols, ec]))), shape=(pts.shape[0],) * 2).tocsr()
    tree = minimum_spanning_tree(graph)
    tree = tree + tree.T
    order, pred = breadth_first_order(tree, anchor, directed=False)
    if order.shape[0] != pts.shape[0]:
        raise BranchError("node set is not connected at this resolution")
    arg = np.empty(J.shape[0])
    arg[anchor] = np.angle(J[anchor])
    worst = 0.0
    for node in order[1:]:
        parent = pred[node]
        step = np.angle(J[node] / J[parent])
        worst = max(worst, abs(step))
        arg[node] = arg[parent] + step
    if worst > np.pi / 2:
        raise BranchError(f"argument of J jumps by {worst:.2f} rad between neighbouring nodes")
    jump = np.abs(arg[rows] - arg[cols] - np.angle(J[rows] / J[cols]))
    if np.any(jump > np.pi):
        raise BranchError("J winds around 0 on the node set: no single-valued branch of J^(2/p)")
    return np.log(np.abs(J)) + 1j * arg


def jacobian_power(J: np.ndarray, p: float, nodes=None, anchor: int = 0,
                   simply_connected: bool = True) -> np.ndarray:
    """J^(2/p): an integer power when 2/p is an integer, else a continuous branch."""
    m = integer_power(p)
    if m is not None:
        return J ** m
    if not simply_connected:
        raise BranchError("J^(2/p) with 2/p non-integer needs a simply connected domain")
    if nodes is None:
        return np.exp((2.0 / p) * np.log(J))
    return np.exp((2.0 / p) * _continuous_log(J, nodes, anchor))


def pullback_operator(f: Callable, jac: Callable, p: float, source_basis: TruncatedBasis,
                      target_basis: TruncatedBasis, target_rule: QuadratureRule,
                      target_domain: Optional[Domain] = None,
                      source_domain: Optional[Domain] = None,
                      residual_cap: Optional[float] = None) -> IsometryOperator:
    """Matrix of psi -> (psi o f) J_f^(2/p) from the source basis (on the image
    domain) to the target basis (on the domain of f).

    ``f`` maps an (N, n) node array to (N, n); ``jac`` returns either the
    complex Jacobian determinant (N,) or the Jacobian matrices (N, n, n).
    The worst column residual is always reported; it only raises when
    ``residual_cap`` is given (high-degree columns are truncated by design).
    """
    if source_basis.dim != target_basis.dim:
        raise IsometryError("source and target bases must have the same dimension")
    nodes = target_rule.nodes
    w = as_points(f(nodes), source_basis.dim)
    if source_domain is not None and not np.all(source_domain.contains(w)):
        raise IsometryError("f maps quadrature nodes outside the source domain")
    J = _jacobian_det(jac, nodes)
    if np.any(np.abs(J) == 0) or not np.all(np.isfinite(J)):
        raise IsometryError("Jacobian vanishes or is undefined on quadrature nodes")
    sc = True if target_domain is None else target_domain.simply_connected
    center = np.zeros(nodes.shape[1]) if target_domain is None else target_domain.interior_center()
    anchor = int(np.argmin(np.sum(np.abs(nodes - center) ** 2, axis=1)))
    Jp = jacobian_power(J, p, nodes, anchor, simply_connected=sc)
    samples = source_basis.evaluate(w) * Jp[:, None]
    ls = WeightedLeastSquares(target_basis.evaluate(nodes), target_rule.weights)
    matrix, resid = ls.solve(samples)
    worst = float(np.max(resid))
    if residual_cap is not None and worst > residual_cap:
        raise ProjectionError(
            f"projection residual {worst:.3e} exceeds cap {residual_cap:.1e}; raise the target "
            "degree or lower the source degree")
    return IsometryOperator(matrix, p, source_basis, target_basis, PULLBACK, worst, resid)


def isometry_defect(op: IsometryOperator, source_rule: QuadratureRule,
                    target_rule: QuadratureRule, indices: Optional[Sequence[int]] = None):
    """Relative norm change |(||P e_j|| - ||e_j||)| / ||e_j|| for a battery of basis elements."""
    indices = range(len(op.source_basis)) if indices is None else indices
    out = []
    for j in indices:
        e = HoloFunction(op.source_basis, np.eye(len(op.source_basis))[j])
        a = pnorm(e, op.p, source_rule)
        b = pnorm(op.apply(e), op.p, target_rule)
        out.append(abs(b - a) / a)
    return np.array(out)


@dataclass
class RationalMap:
    numerators: list
    denominator: HoloFunction
    dim: int
    exclusion_threshold: float
    condition: float = 1.0
    diagnostics: list = field(default_factory=list)

    def usable(self, points) -> np.ndarray:
        z = as_points(points, self.dim)
        return np.abs(self.denominator(z)) > self.exclusion_threshold

    def __call__(self, points) -> np.ndarray:
        """F at the points; unusable points (|phi_0| <= tau) come back as NaN."""
        z = as_points(points, self.dim)
        den = self.denominator(z)
        out = np.stack([num(z) / den for num in self.numerators], axis=1)
        out[np.abs(den) <= self.exclusion_threshold] = np.nan
        return out

    def jacobian_matrix(self, points) -> np.ndarray:
        """dF_j/dz_k by the quotient rule, shape (N, n, n)."""
        z = as_points(points, self.dim)
        den = self.denominator(z)
        dden = self.denominator.gradient(z)
        rows = []
        for num in self.numerators:
            rows.append((num.gradient(z) * den[:, None] - num(z)[:, None] * dden) / den[:, None] ** 2)
        return np.stack(rows, axis=1)

    def jacobian(self, points) -> np.ndarray:
        return np.linalg.det(self.jacobian_matrix(points))

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "exclusion_threshold": self.exclusion_threshold,
            "condition": self.condition,
            "denominator": self.denominator.to_json(),
            "numerators": [n.to_json() for n in self.numerators],
            "diagnostics": list(self.diagnostics),
        }


def _pullback_images(op: IsometryOperator, condition_cap: float):
    """Coefficient vectors P(1), P(w_1), ..., P(w_n) on Omega_1, plus a condition estimate."""
    n = op.source_basis.dim if op.direction == PULLBACK else op.target_basis.dim
    if op.direction == PULLBACK:
        return op.matrix[:, :n + 1], op.target_basis, 1.0
    # forward operator T: A^p(Omega_1) -> A^p(Omega_2); P = T^-1 via regularized least squares
    U, s, Vh = np.linalg.svd(op.matrix, full_matrices=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    if cond > condition_cap:
        raise ConditioningError("truncated operator is rank-deficient", cond)
    reg = s[0] * 1e-14
    filt = s / (s ** 2 + reg ** 2)
    rhs = np.eye(op.matrix.shape[0], n + 1)
    images = Vh.conj().T @ (filt[:, None] * (U.conj().T @ rhs))
    return images, op.source_basis, cond


def reconstruct_map(op, p: Optional[float] = None, tau: Optional[float] = None,
                    grid=None, condition_cap: float = 1e10,
                    source_basis: Optional[TruncatedBasis] = None,
                    target_basis: Optional[TruncatedBasis] = None) -> RationalMap:
    """F = (P(w_1), ..., P(w_n)) / P(1).

    ``op`` is an :class:`IsometryOperator` or a callable mapping source
    coefficient vectors to target coefficient vectors (then both bases are
    required).  ``tau`` defaults to 1e-8 * max |P(1)| over ``grid``.
    """
    if not isinstance(op, IsometryOperator):
        if source_basis is None or target_basis is None or p is None:
            raise IsometryError("a raw pullback action needs p and both bases")
        cols = np.eye(len(source_basis))[:, :source_basis.dim + 1]
        mat = np.stack([np.asarray(op(c)) for c in cols.T], axis=1)
        full = np.zeros((len(target_basis), len(source_basis)), dtype=np.complex128)
        full[:, :mat.shape[1]] = mat
        op = IsometryOperator(full, p, source_basis, target_basis, PULLBACK)
    if op.source_basis.dim != op.target_basis.dim:
        raise IsometryError(
            f"equidimension violated: source dimension {op.source_basis.dim} vs target "
            f"dimension {op.target_basis.dim}; the reconstructed map cannot have full rank")
    images, basis, cond = _pullback_images(op, condition_cap)
    n = basis.dim
    den = HoloFunction(basis, images[:, 0])
    nums = [HoloFunction(basis, images[:, j]) for j in range(1, n + 1)]
    if tau is None:
        pts = grid if grid is not None else _default_grid(n)
        tau = 1e-8 * float(np.max(np.abs(den(pts))))
    diagnostics = []
    if op.direction == FORWARD:
        diagnostics.append(f"forward operator inverted, condition {cond:.3e}")
    return RationalMap(nums, den, n, tau, cond, diagnostics)


def _default_grid(n: int, radius: float = 0.5, count: int = 64):
    rng = np.random.default_rng(12345)
    g = rng.standard_normal((count, 2 * n))
    g *= radius * rng.random((count, 1)) ** (1 / (2 * n)) / np.linalg.norm(g, axis=1, keepdims=True)
    return g[:, :n] + 1j * g[:, n:]


def disk_grid(radius: float, count: int, center=0j) -> np.ndarray:
    """Deterministic sunflower points filling the closed disk of the given radius."""
    k = np.arange(count)
    r = radius * np.sqrt((k + 0.5) / count)
    theta = k * np.pi * (3.0 - np.sqrt(5.0))
    return (center + r * np.exp(1j * theta)).reshape(-1, 1)


@dataclass
class JacobianReport:
    max_residual: float
    mean_residual: float
    n_points: int
    n_excluded: int
    battery_size: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _forward_coeffs(op: IsometryOperator, phi: HoloFunction) -> HoloFunction:
    """T phi, where T is the inverse of the pullback."""
    if op.direction == FORWARD:
        return op.apply(phi)
    coeffs, *_ = np.linalg.lstsq(op.matrix, phi.coeffs, rcond=1e-13)
    return HoloFunction(op.source_basis, coeffs)


def verify_jacobian_relation(op: IsometryOperator, F: RationalMap, p: float, sample_points,
                             test_functions: Sequence[HoloFunction],
                             delta: float = 1e-10) -> JacobianReport:
    """Residuals of |T phi(F(z))| |J_F(z)|^(2/p) = |phi(z)| over points x functions.

    Each residual is divided by |phi(z)| + delta * max_z |phi(z)|.
    """
    z = as_points(sample_points, F.dim)
    keep = F.usable(z)
    zu = z[keep]
    if zu.shape[0] == 0:
        return JacobianReport(np.nan, np.nan, 0, int(z.shape[0]), len(test_functions))
    Fz = F(zu)
    Jabs = np.abs(F.jacobian(zu)) ** (2.0 / p)
    res = []
    for phi in test_functions:
        psi = _forward_coeffs(op, phi)
        lhs = np.abs(psi(Fz)) * Jabs
        rhs = np.abs(phi(zu))
        scale = rhs + delta * max(rhs.max(), np.finfo(float).tiny)
        res.append(np.abs(lhs - rhs) / scale)
    res = np.concatenate(res)
    return JacobianReport(float(res.max()), float(res.mean()), int(zu.shape[0]),
                          int(z.shape[0] - zu.shape[0]), len(test_functions))


# -- model maps ---------------------------------------------------------------


def mobius(a: complex):
    """Disk automorphism z -> (z - a) / (1 - conj(a) z) and its derivative."""
    a = complex(a)

    def f(z):
        z = np.asarray(z)
        return (z - a) / (1 - np.conj(a) * z)

    def jac(z):
        z = np.asarray(z)[:, 0]
        return (1 - abs(a) ** 2) / (1 - np.conj(a) * z) ** 2

    return f, jac


def scaling(r: complex, dim: int = 1):
    r = complex(r)

    def f(z):
        return r * np.asarray(z)

    def jac(z):
        return np.full(np.asarray(z).shape[0], r ** dim)

    return f, jac


def unitary(U):
    """Linear automorphism z -> U z of the unit ball."""
    U = np.asarray(U, dtype=np.complex128)
    det = np.linalg.det(U)

    def f(z):
        return np.asarray(z) @ U.T

    def jac(z):
        return np.full(np.asarray(z).shape[0], det)

    return f, jac


@dataclass
class RoundtripReport:
    """Pullback, reconstruction and Jacobian check for a known model map."""

    operator: IsometryOperator
    map: RationalMap
    sup_error: float
    jacobian: JacobianReport
    n_grid: int

    def to_json(self) -> dict:
        return {"sup_error": self.sup_error, "n_grid": self.n_grid,
                "projection_residual": self.operator.projection_residual,
                "jacobian": self.jacobian.to_json(), "map": self.map.to_json()}


def map_roundtrip(f: Callable, jac: Callable, p: float, degree: int = 40,
                  resolution: Optional[int] = None, radius: float = 0.6, n_points: int = 20,
                  n_functions: int = 10, domain: Optional[Domain] = None) -> RoundtripReport:
    """Pull back through ``f`` on the unit disk, rebuild F and compare with f.

    Square bases (equal source and target degree) keep the inverse used by the
    Jacobian battery well posed; the battery uses the ``n_functions`` lowest
    monomials at ``n_points`` sunflower points of radius ``radius``.
    """
    from .domains import build_quadrature, disk

    domain = domain or disk(1.0)
    if domain.dim != 1:
        raise IsometryError("the roundtrip check is implemented on planar domains")
    basis = TruncatedBasis(1, degree)
    rule = build_quadrature(domain, resolution or degree + 16)
    op = pullback_operator(f, jac, p, basis, basis, rule, target_domain=domain)
    grid = disk_grid(radius, 400)
    F = reconstruct_map(op, grid=grid)
    keep = F.usable(grid)
    err = np.abs(F(grid[keep])[:, 0] - as_points(f(grid[keep]), 1)[:, 0])
    sup = float(np.max(err)) if err.size else float("nan")
    battery = [HoloFunction.monomial(basis, (k,)) for k in range(n_functions)]
    report = verify_jacobian_relation(op, F, p, disk_grid(radius, n_points), battery)
    return RoundtripReport(op, F, sup, report, int(keep.sum()))
