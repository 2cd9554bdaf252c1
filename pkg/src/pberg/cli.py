"""Command-line front end.

    pberg <kernel|profile|map|family|extend> --spec job.json --out DIR [--threads N]
    pberg --check [--out DIR]

Exit status: 0 success, 2 invalid job (nothing written), 3 solver did not
converge (artifacts written with converged=false), 4 refused precondition
(branch, conditioning, projection), 1 failed acceptance battery.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import io as pio
from ._expr import ExpressionError, compile_expression
from ._parallel import pmap, thread_count
from ._solver import ConditioningError as SolverConditioningError
from ._solver import SolverError, SolverOptions
from .basis import DEFAULT_DEGREE, BasisError, HoloFunction, SingularSystemError, TruncatedBasis
from .domains import DomainError, build_quadrature
from .extremal import DomainPointError, gram_kernel, kernel_profile, p_extremal
from .isometry import IsometryError, map_roundtrip, mobius, scaling, unitary
from .variation import (FamilyError, HoloFunctional, dual_norm, fiber_extremal, fiber_rule,
                        minimal_extension, probe_tolerance, psh_probe, tabulate)

COMMANDS = ("kernel", "profile", "map", "family", "extend")
EXIT_OK, EXIT_CHECK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_REFUSED = 0, 1, 2, 3, 4


@dataclass
class Outcome:
    """Artifacts (file name -> text) plus convergence state."""

    files: dict = field(default_factory=dict)
    converged: bool = True


# -- job parsing helpers ------------------------------------------------------------


def _solver_block(job, need=("p",)):
    s = job.get("solver")
    if not isinstance(s, dict):
        raise pio.SpecError("missing 'solver' block")
    for key in need:
        if key not in s:
            raise pio.SpecError(f"solver block: missing required field {key!r}")
    return s


def _p(s) -> float:
    return pio._positive(s["p"], "p")


def _options(s) -> SolverOptions:
    kw = {}
    if s.get("tol") is not None:
        kw["tol"] = pio._positive(s["tol"], "tol")
    for key in ("seed", "n_starts", "max_iter"):
        if key in s:
            kw[key] = int(s[key])
    return SolverOptions(**kw)


def _degree(s, dim) -> int:
    d = int(s.get("degree", DEFAULT_DEGREE[dim]))
    if d < 0:
        raise pio.SpecError("degree must be non-negative")
    return d


def _resolution(s, degree) -> int:
    r = int(s.get("resolution", max(32, degree + 16)))
    if r < 4:
        raise pio.SpecError("resolution must be at least 4")
    return r


def _coords_header(dim, prefix="z"):
    if dim == 1:
        return [f"{prefix}_re", f"{prefix}_im"]
    return [f"{prefix}{j + 1}_{part}" for j in range(dim) for part in ("re", "im")]


def _coords(z):
    out = []
    for v in np.atleast_1d(z):
        out += [float(np.real(v)), float(np.imag(v))]
    return out


def _ray_extent(domain, c, direction) -> float:
    if domain.kind in ("disk", "hartogs_fiber"):
        return domain.radius
    if domain.kind == "ellipse":
        a, b = domain.semiaxes
        return 1.0 / math.hypot(direction.real / a, direction.imag / b)
    lo, hi = 0.0, 1.0
    while domain.contains(np.array([[c + hi * direction]]))[0]:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if domain.contains(np.array([[c + mid * direction]]))[0]:
            lo = mid
        else:
            hi = mid
    return lo


def _boundary_path(domain, block):
    """Points at ray distance 2^-k from the boundary, k = 1..k_max, from the center outward."""
    if domain.dim != 1:
        raise pio.SpecError("boundary paths are implemented for planar domains")
    direction = pio.complex_from_json(block.get("direction", [1.0, 0.0]))
    if direction == 0:
        raise pio.SpecError("direction must be nonzero")
    direction /= abs(direction)
    c = complex(domain.interior_center()[0])
    lo = _ray_extent(domain, c, direction)
    k_max = int(block.get("k_max", 5))
    ks = range(int(block.get("k_min", 1)), k_max + 1)
    pts = [c + (lo - 2.0 ** -k) * direction for k in ks]
    if any(lo - 2.0 ** -k <= 0 for k in ks):
        raise pio.SpecError("boundary path would cross the center; raise k_min")
    return np.array(pts).reshape(-1, 1)


# -- commands -----------------------------------------------------------------------


def _prepare_kernel(job):
    dom = pio.domain_from_json(pio._require(job, "domain", "kernel job"))
    s = _solver_block(job)
    p = _p(s)
    z = pio.point_from_json(pio._require(job, "point", "kernel job"), dom.dim)
    if not dom.contains(z.reshape(1, -1))[0]:
        raise pio.SpecError(f"point {z.tolist()} is not inside the domain")
    w = pio.weight_from_json(job.get("weight"), dom.dim)
    d = _degree(s, dom.dim)
    res = _resolution(s, d)
    opts = _options(s)

    def run(threads):
        basis = TruncatedBasis(dom.dim, d)
        rule = build_quadrature(dom, res)
        r = p_extremal(basis, rule, w, p, z, opts, dom)
        doc = r.to_json()
        doc.update(command="kernel", domain=pio.domain_to_json(dom), point=z,
                   resolution=res, quadrature_error=rule.est_error)
        if p == 2:
            doc["gram_kernel_value"] = gram_kernel(basis, rule, w, z)
        return Outcome({"kernel.json": pio.dumps(doc)}, r.converged)

    return run


def _prepare_profile(job):
    dom = pio.domain_from_json(pio._require(job, "domain", "profile job"))
    s = _solver_block(job)
    p = _p(s)
    if "path" in job:
        path = pio.points_from_json(job["path"], dom.dim)
    else:
        path = _boundary_path(dom, pio._require(job, "boundary_path", "profile job"))
    inside = dom.contains(path)
    if not np.all(inside):
        raise pio.SpecError(f"{int((~inside).sum())} path points are outside the domain")
    w = pio.weight_from_json(job.get("weight"), dom.dim)
    d = _degree(s, dom.dim)
    res = _resolution(s, d)
    opts = _options(s)

    def run(threads):
        basis = TruncatedBasis(dom.dim, d)
        rule = build_quadrature(dom, res)
        prof = kernel_profile(dom, p, list(path), basis, rule, w, opts, threads)
        header = _coords_header(dom.dim) + ["kernel_value", "converged", "increasing", "tol"]
        rows = [_coords(q.point) + [q.kernel_value, q.converged, q.increasing, q.tol]
                for q in prof]
        conv = all(q.converged for q in prof)
        diag = {"command": "profile", "p": p, "degree": d, "resolution": res,
                "quadrature_error": rule.est_error, "converged": conv,
                "strictly_increasing": all(q.increasing for q in prof[1:]),
                "diagnostics": [] if conv else ["some profile points did not converge"]}
        return Outcome({"profile.csv": pio.csv_text(header, rows),
                        "diagnostics.json": pio.dumps(diag)}, conv)

    return run


def _model_map(block):
    kind = pio._require(block, "kind", "map")
    if kind == "identity":
        return scaling(1.0)
    if kind == "scaling":
        return scaling(pio.complex_from_json(pio._require(block, "r", "scaling map")))
    if kind == "mobius":
        a = pio.complex_from_json(pio._require(block, "a", "mobius map"))
        if not abs(a) < 1:
            raise pio.SpecError("Mobius parameter must satisfy |a| < 1")
        return mobius(a)
    if kind == "unitary":
        U = np.array([[pio.complex_from_json(x) for x in row] for row in block["U"]])
        return unitary(U)
    if kind == "expression":
        fe = compile_expression(pio._require(block, "f", "expression map"), ("z",), real=False)
        je = compile_expression(pio._require(block, "jac", "expression map"), ("z",), real=False)
        return (lambda z: np.asarray(fe(z=np.asarray(z)[:, 0]), dtype=complex).reshape(-1, 1),
                lambda z: np.asarray(je(z=np.asarray(z)[:, 0]), dtype=complex).reshape(-1))
    raise pio.SpecError(f"unknown map kind {kind!r}")


def _prepare_map(job):
    f, jac = _model_map(pio._require(job, "map", "map job"))
    s = _solver_block(job)
    p = _p(s)
    d = _degree(s, 1) if "degree" in s else 40
    res = _resolution(s, d)
    bat = job.get("battery", {})
    radius = float(bat.get("radius", 0.6))
    n_pts, n_fn = int(bat.get("points", 20)), int(bat.get("functions", 10))
    tol = float(bat.get("tol", 1e-4))
    if not 0 < radius < 1:
        raise pio.SpecError("battery radius must lie in (0, 1)")
    if n_fn > d + 1:
        raise pio.SpecError("battery has more functions than the basis")

    def run(threads):
        rep = map_roundtrip(f, jac, p, d, res, radius, n_pts, n_fn)
        doc = rep.to_json()
        doc.update(command="map", p=p, degree=d, resolution=res, tol=tol,
                   jacobian_ok=bool(rep.jacobian.max_residual <= tol),
                   diagnostics=list(rep.map.diagnostics))
        return Outcome({"map.json": pio.dumps(doc)}, True)

    return run


def _prepare_family(job):
    fam = pio.family_from_json(pio._require(job, "family", "family job"))
    s = job.get("solver", {})
    d = int(s.get("degree", 20))
    res = _resolution(s, d)
    opts = _options(s)
    probe = pio._require(job, "probe", "family job")
    centers = [pio.complex_from_json(c) for c in pio._require(probe, "centers", "probe")]
    radii = [pio._positive(r, "probe radius") for r in pio._require(probe, "radii", "probe")]
    z = pio.point_from_json(probe.get("z", [0.0, 0.0]), fam.fiber_dim)
    field_kind = probe.get("field", "log_kernel")
    if field_kind not in ("log_kernel", "log_dual_norm"):
        raise pio.SpecError("probe field must be 'log_kernel' or 'log_dual_norm'")
    n_angles = int(probe.get("n_angles", 128))
    if n_angles < 64:
        raise pio.SpecError("probes need at least 64 angles")
    grid = probe.get("grid")
    for c in centers:
        if not fam.in_parameter_domain(c):
            raise pio.SpecError(f"probe center {c} is outside the parameter disk")
    basis = TruncatedBasis(fam.fiber_dim, d)

    def run(threads):
        flags = []

        def value(t):
            t = complex(t)
            if field_kind == "log_kernel":
                r = fiber_extremal(fam, t, z, basis, res, opts)
                flags.append(r.converged)
                return math.log(r.kernel_value)
            out = dual_norm(fam, HoloFunctional.delta(z), t, basis, res, opts, full=True)
            flags.append(out.converged)
            return math.log(out.value)

        if grid is not None:
            half = pio._positive(grid.get("half_width", 0.6), "grid half_width")
            fld = tabulate(value, fam.parameter_center, half, int(grid.get("n", 9)), threads)
        else:
            def fld(ts):
                return np.array(pmap(value, list(np.ravel(ts)), threads))
        rule = fiber_rule(fam, fam.parameter_center, res)
        tol = float(probe["tol"]) if probe.get("tol") is not None else probe_tolerance(rule, opts.tol)
        rep = psh_probe(fld, centers, radii, tol, n_angles, fam.parameter_domain())
        header = ["t_center_re", "t_center_im", "radius", "field_center", "circle_mean",
                  "margin", "violated", "tol"]
        rows = [[r.center.real, r.center.imag, r.radius, r.field_center, r.circle_mean,
                 r.margin, r.violated, r.tol] for r in rep.rows]
        conv = all(flags)
        diag = {"command": "family", "m": fam.m, "field": field_kind, "degree": d,
                "resolution": res, "tol": tol, "skipped": rep.skipped,
                "violations": rep.violations, "declared_psh": fam.declared_psh,
                "converged": conv,
                "diagnostics": [] if conv else ["some fiber solves did not converge"]}
        return Outcome({"probe.csv": pio.csv_text(header, rows),
                        "diagnostics.json": pio.dumps(diag)}, conv)

    return run


def _prepare_extend(job):
    fam = pio.family_from_json(pio._require(job, "family", "extend job"))
    degrees = job.get("degrees", [6, 6])
    if len(degrees) != 2 or min(int(x) for x in degrees) < 0:
        raise pio.SpecError("degrees must be [d_t, d_z] with non-negative entries")
    dt, dz = int(degrees[0]), int(degrees[1])
    ublock = pio._require(job, "u", "extend job")
    coeffs = np.array([pio.complex_from_json(c) for c in pio._require(ublock, "coeffs", "u")])
    if coeffs.size == 0:
        raise pio.SpecError("u needs at least one coefficient")
    nz = np.nonzero(coeffs)[0]
    if nz.size and nz[-1] > dz:
        raise pio.SpecError(f"u has degree {nz[-1]} above d_z={dz}: constraints are infeasible")
    u = HoloFunction(TruncatedBasis(1, coeffs.size - 1), coeffs)
    res = int(job.get("resolution", 12))
    opts = _options(job.get("solver", {}))

    def run(threads):
        r = minimal_extension(fam, u, (dt, dz), res, opts)
        doc = r.to_json()
        doc.update(command="extend", m=fam.m, resolution=res, degrees=[dt, dz])
        return Outcome({"extension.json": pio.dumps(doc)}, r.converged)

    return run


_PREPARE = {"kernel": _prepare_kernel, "profile": _prepare_profile, "map": _prepare_map,
            "family": _prepare_family, "extend": _prepare_extend}

_INVALID = (pio.SpecError, ExpressionError, DomainError, DomainPointError, BasisError,
            FamilyError, KeyError, TypeError)
_REFUSED = (IsometryError, SolverConditioningError, SingularSystemError)


def run_job(command: str, job: dict, out_dir: str, threads=None, stderr=sys.stderr) -> int:
    """Validate, compute and write artifacts; returns the exit status."""
    if command not in COMMANDS:
        print(f"error: unknown command {command!r}", file=stderr)
        return EXIT_INVALID
    if job.get("command", command) != command:
        print(f"error: job declares command {job.get('command')!r}, not {command!r}",
              file=stderr)
        return EXIT_INVALID
    try:
        runner = _PREPARE[command](job)
    except _INVALID as exc:
        print(f"invalid job: {exc}", file=stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"invalid job: {exc}", file=stderr)
        return EXIT_INVALID
    try:
        outcome = runner(threads)
    except _REFUSED as exc:
        _write(out_dir, {"diagnostics.json": pio.dumps(
            {"command": command, "refused": True, "diagnostics": [str(exc)]})})
        print(f"refused: {exc}", file=stderr)
        return EXIT_REFUSED
    except SolverError as exc:
        _write(out_dir, {"diagnostics.json": pio.dumps(
            {"command": command, "converged": False, "diagnostics": [str(exc)]})})
        print(f"solver failure: {exc}", file=stderr)
        return EXIT_NONCONVERGED
    _write(out_dir, outcome.files)
    return EXIT_OK if outcome.converged else EXIT_NONCONVERGED


def _write(out_dir, files):
    for name, text in sorted(files.items()):
        pio.write_atomic(os.path.join(out_dir, name), text)


def _parser():
    ap = argparse.ArgumentParser(prog="pberg", description="p-Bergman kernel toolkit")
    ap.add_argument("command", nargs="?", choices=COMMANDS)
    ap.add_argument("--spec", help="JSON job file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--check", action="store_true", help="run the acceptance battery")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: PBERG_THREADS or 1)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        threads = thread_count(args.threads)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    status = EXIT_OK
    if args.command is not None:
        if not args.spec or not args.out:
            print("error: a command needs --spec and --out", file=sys.stderr)
            return EXIT_INVALID
        try:
            with open(args.spec) as fh:
                job = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"invalid job: {exc}", file=sys.stderr)
            return EXIT_INVALID
        if not isinstance(job, dict):
            print("invalid job: top level must be an object", file=sys.stderr)
            return EXIT_INVALID
        status = run_job(args.command, job, args.out, threads)
    if args.check:
        from .checks import run_all
        results = run_all(verbose=True)
        if args.out:
            _write(args.out, {"check.json": pio.dumps([r.to_json() for r in results])})
        if not all(r.passed for r in results):
            status = status or EXIT_CHECK
    elif args.command is None:
        _parser().print_usage(sys.stderr)
        return EXIT_INVALID
    return status


if __name__ == "__main__":
    sys.exit(main())
