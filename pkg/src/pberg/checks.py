"""Acceptance battery: oracle comparisons and invariant checks with timings.

Each ``check_*`` function returns a :class:`CheckResult`; :func:`run_all` runs
them in order.  ``pberg --check`` and the acceptance tests both use this module.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .basis import HoloFunction, TruncatedBasis
from .domains import ball, build_quadrature, disk, ellipse
from .extremal import (ZERO, Weight, disk_kernel_closed_form, gram_kernel, kernel_profile,
                       p_extremal, pnorm)
from .isometry import map_roundtrip, mobius, scaling
from .variation import (DomainFamily, HoloFunctional, dual_norm, fiber_extremal, fiber_rule,
                        minimal_extension, probe_tolerance, psh_probe, tabulate)


@dataclass
class CheckResult:
    name: str
    passed: bool
    seconds: float
    budget: float
    details: dict = field(default_factory=dict)

    @property
    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name} ({self.seconds:.1f}s / {self.budget:.0f}s budget) {self.summary}"

    @property
    def summary(self) -> str:
        return " ".join(f"{k}={_short(v)}" for k, v in self.details.items()
                        if not isinstance(v, (list, dict)))

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "seconds": self.seconds,
                "budget": self.budget, "details": self.details}


def _short(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def _timed(name, budget, fn) -> CheckResult:
    t0 = time.perf_counter()
    ok, details = fn()
    dt = time.perf_counter() - t0
    return CheckResult(name, bool(ok and dt <= budget), dt, budget, details)


def _rel(a, b):
    return abs(a - b) / abs(b)


# -- extremal ---------------------------------------------------------------------


def check_disk_center() -> CheckResult:
    """p-kernel of the unit disk at 0 equals pi^(-2/p); d=20, resolution 32."""

    def run():
        basis = TruncatedBasis(1, 20)
        rule = build_quadrature(disk(1.0), 32)
        worst, slowest, conv = 0.0, 0.0, True
        for p in (0.5, 1.0, 1.5, 3.0):
            t0 = time.perf_counter()
            r = p_extremal(basis, rule, ZERO, p, 0j)
            slowest = max(slowest, time.perf_counter() - t0)
            worst = max(worst, _rel(r.kernel_value, math.pi ** (-2 / p)))
            conv &= r.converged
        return worst <= 1e-3 and slowest <= 10 and conv, {
            "max_rel_error": worst, "slowest_p_seconds": slowest, "converged": conv}

    return _timed("disk p-kernel at center", 40, run)


def check_mobius_covariance() -> CheckResult:
    """B_{D,1}(0.5) against the Mobius-transported value; exponent 4/p by scaling."""

    def run():
        basis = TruncatedBasis(1, 30)
        rule = build_quadrature(disk(1.0), 40)
        val = p_extremal(basis, rule, ZERO, 1.0, 0.5).kernel_value
        oracle = math.pi ** -2 * 0.75 ** -4
        err = _rel(val, oracle)
        exps = {}
        for p in (1.0, 3.0):
            base = p_extremal(basis, rule, ZERO, p, 0.3).kernel_value
            for r in (0.5, 2.0):
                scaled = p_extremal(basis, build_quadrature(disk(r), 40), ZERO, p, 0.3 * r)
                exps[(p, r)] = -math.log(scaled.kernel_value / base) / math.log(r)
        exp_err = max(abs(e - 4.0 / p) for (p, _), e in exps.items())
        return err <= 5e-3 and exp_err <= 1e-8, {
            "kernel_0.5": val, "rel_error": err, "max_exponent_error": exp_err}

    return _timed("Mobius covariance and 4/p scaling exponent", 60, run)


def check_p2_closed_forms() -> CheckResult:
    def run():
        basis = TruncatedBasis(1, 30)
        rule = build_quadrature(disk(1.0), 48)
        disk_err, cross_err = 0.0, 0.0
        for z in (0.0, 0.3, 0.5, 0.3 + 0.4j, 0.7):
            g = gram_kernel(basis, rule, ZERO, z)
            disk_err = max(disk_err, _rel(g, disk_kernel_closed_form(z, 2.0)))
            cross_err = max(cross_err, _rel(p_extremal(basis, rule, ZERO, 2.0, z).kernel_value, g))
        b2 = gram_kernel(TruncatedBasis(2, 8), build_quadrature(ball(2), 24), ZERO, np.zeros(2))
        ball_err = _rel(b2, 2 / math.pi ** 2)
        return max(disk_err, cross_err, ball_err) <= 1e-6, {
            "disk_rel_error": disk_err, "ball_rel_error": ball_err, "p_extremal_vs_gram": cross_err}

    return _timed("p=2 closed forms", 30, run)


def check_decreasing() -> CheckResult:
    """Smaller domain, larger kernel: 0.8D in D and the disk of radius 0.5 in the (1, 0.5) ellipse."""

    def run():
        margins = []
        basis = TruncatedBasis(1, 30)
        pairs = [(disk(0.8), disk(1.0), [0.0, 0.2, -0.3j, 0.4 + 0.3j, 0.6]),
                 (disk(0.5), ellipse(1.0, 0.5), [0.0, 0.1, 0.2j, -0.25, 0.2 + 0.2j])]
        for small, large, pts in pairs:
            rs, rl = build_quadrature(small, 48), build_quadrature(large, 48)
            for p in (1.0, 2.0):
                for z in pts:
                    a = p_extremal(basis, rs, ZERO, p, z)
                    b = p_extremal(basis, rl, ZERO, p, z)
                    tol = a.tol * a.kernel_value + b.tol * b.kernel_value
                    margins.append((a.kernel_value - b.kernel_value) / tol)
        worst = min(margins)
        return worst > 1.0, {"min_margin_over_tol": worst, "n_comparisons": len(margins)}

    return _timed("decreasing property", 60, run)


def check_profiles() -> CheckResult:
    """Kernel blows up along a_k = 1 - 2^-k, k = 1..5."""

    def run():
        ks = np.arange(1, 6)
        path = [complex(1 - 2.0 ** -k) for k in ks]
        out = {}
        ok = True
        for p, d in ((1.0, 256), (2.0, 256)):
            rule = build_quadrature(disk(1.0), d + 16)
            prof = kernel_profile(disk(1.0), p, path, TruncatedBasis(1, d), rule)
            err = max(_rel(q.kernel_value, disk_kernel_closed_form(q.point[0], p)) for q in prof)
            inc = all(q.increasing for q in prof[1:])
            ok &= inc and err <= 1e-2 and all(q.converged for q in prof)
            out[f"disk_p{p:g}_rel_error"] = err
            out[f"disk_p{p:g}_increasing"] = inc
        # ellipse (1, 0.5) along the major axis; the vertex curvature radius is 0.25,
        # so the ray offset is the boundary distance once 2^-k <= 0.25
        prof = kernel_profile(ellipse(1.0, 0.5), 2.0, path, TruncatedBasis(1, 40),
                              build_quadrature(ellipse(1.0, 0.5), 64))
        inc = all(q.increasing for q in prof[1:])
        out["ellipse_p2_increasing"] = inc
        return ok and inc, out

    return _timed("exhaustion profiles", 120, run)


# -- isometry ---------------------------------------------------------------------


def check_isometry_roundtrip() -> CheckResult:
    def run():
        sup, jac = 0.0, 0.0
        for f, j in (scaling(1.0), scaling(0.5), mobius(0.3)):
            for p in (1.0, 2.0):
                rep = map_roundtrip(f, j, p, degree=40, resolution=56, radius=0.6,
                                    n_points=20, n_functions=10)
                sup = max(sup, rep.sup_error)
                jac = max(jac, rep.jacobian.max_residual)
        return sup <= 1e-6 and jac <= 1e-4, {"max_sup_error": sup, "max_jacobian_residual": jac}

    return _timed("isometry roundtrip", 20, run)


# -- variation --------------------------------------------------------------------


def _hartogs(u, m):
    return DomainFamily(m=m, u=u)


def check_positivity() -> CheckResult:
    """Hartogs u = |t|^2: log-kernel oracle on a t-grid, psh probes, negative control."""

    def run():
        basis = TruncatedBasis(1, 20)
        res = 32
        out, ok = {}, True
        for m in (1, 2):
            fam = _hartogs(lambda t: np.abs(t) ** 2, m)

            def logk(t, fam=fam):
                return math.log(fiber_extremal(fam, t, 0j, basis, res).kernel_value)

            field_ = tabulate(logk, 0j, 0.6, 9)
            grid = [complex(x, y) for x in (-0.5, 0.0, 0.5) for y in (-0.5, 0.0, 0.5)]
            err = max(abs(logk(t) - (-m * math.log(math.pi) + 2 * m * abs(t) ** 2)) for t in grid)
            tol = probe_tolerance(fiber_rule(fam, 0j, res))
            rep = psh_probe(field_, [0j, 0.1 + 0.1j, -0.2], [0.3], tol,
                            parameter_domain=fam.parameter_domain())
            margin = float(rep.margins[0])
            ok &= err <= 1e-2 and rep.violations == 0 and abs(margin - 0.18 * m) <= 1e-2
            out[f"m{m}_oracle_error"] = err
            out[f"m{m}_violations"] = rep.violations
            out[f"m{m}_margin"] = margin
        neg = _hartogs(lambda t: -np.abs(t) ** 2, 1)

        def logk_neg(t):
            return math.log(fiber_extremal(neg, t, 0j, basis, res).kernel_value)

        rep = psh_probe(np.vectorize(logk_neg), [0j], [0.3], probe_tolerance(fiber_rule(neg, 0j, res)))
        ok &= rep.violations == 1 and abs(rep.margins[0] + 0.18) <= 1e-2
        out["negative_control_margin"] = float(rep.margins[0])
        out["negative_control_violations"] = rep.violations
        return ok, out

    return _timed("positivity of variation", 60, run)


def check_dual_norm() -> CheckResult:
    def run():
        basis = TruncatedBasis(1, 20)
        cases = [(1, 0j, 0.0), (1, 0.3, 0.4), (1, -0.2j, 0.5 + 0.2j), (2, 0.3, 0.0), (2, 0.1j, 0.3)]
        worst = 0.0
        for m, t, z in cases:
            fam = _hartogs(lambda s: np.abs(s) ** 2, m)
            k = fiber_extremal(fam, t, z, basis, 32).kernel_value
            dn = dual_norm(fam, HoloFunctional.delta(z), t, basis, 32)
            worst = max(worst, _rel(dn ** 2, k))
        zero = dual_norm(_hartogs(lambda s: np.abs(s) ** 2, 1), HoloFunctional(), 0.2, basis, 32)
        return worst <= 1e-4 and zero == 0.0, {"max_rel_error": worst, "zero_functional": zero}

    return _timed("dual-norm consistency", 30, run)


def check_extension() -> CheckResult:
    def run():
        prod = DomainFamily(m=1, fiber_domain=disk(1.0))
        b = TruncatedBasis(1, 6)
        r1 = minimal_extension(prod, HoloFunction.constant(b, 1.0), (6, 6), 12)
        rz = minimal_extension(prod, HoloFunction.monomial(b, (1,)), (6, 6), 12)
        tw = DomainFamily(m=1, fiber_domain=disk(1.0),
                          phi=lambda t, z: np.real(t * np.asarray(z).reshape(-1)))
        rw = minimal_extension(tw, HoloFunction.constant(b, 1.0), (6, 6), 12)
        err = max(abs(r1.ratio - 1), abs(rz.ratio - 1))
        return err <= 1e-6 and rw.ratio <= 1 + 1e-3, {
            "flat_max_deviation": err, "weighted_ratio": rw.ratio}

    return _timed("extension constant", 30, run)


# -- property suites ----------------------------------------------------------------


def check_properties() -> CheckResult:
    """Truncation monotonicity, pnorm homogeneity, quadrature refinement, CLI determinism."""

    def run():
        out = {}
        rule = build_quadrature(disk(1.0), 48)
        vals = [p_extremal(TruncatedBasis(1, d), rule, ZERO, 1.0, 0.6).kernel_value
                for d in (4, 8, 12, 16)]
        mono = all(b >= a * (1 - 1e-8) for a, b in zip(vals, vals[1:]))
        out["truncation_monotone"] = mono

        f = HoloFunction(TruncatedBasis(1, 3), np.array([1.0, 0.5j, -0.2, 0.1]))
        hom = max(abs(pnorm(f * lam, p, rule) - abs(lam) * pnorm(f, p, rule)) / pnorm(f, p, rule)
                  for p in (0.5, 1.0, 3.0) for lam in (2.0, -0.5j, 3 + 4j))
        out["homogeneity_error"] = hom

        w = Weight(lambda z: np.abs(z[:, 0]) ** 2)
        exact = math.pi * (1 - math.exp(-1))
        errs = []
        for r in (4, 8, 16):
            q = build_quadrature(disk(1.0), r)
            errs.append(abs(q.integrate(w.factors(q.nodes)) - exact))
        refine = errs[1] < errs[0] and errs[2] <= max(errs[1], 1e-13)
        out["refinement_errors_decrease"] = refine

        from .cli import run_job
        job = {"domain": {"kind": "disk"}, "solver": {"p": 1, "degree": 12, "resolution": 24},
               "point": [0.2, 0.1]}
        blobs = []
        with tempfile.TemporaryDirectory() as tmp:
            for i in range(2):
                d = os.path.join(tmp, str(i))
                code = run_job("kernel", json.loads(json.dumps(job)), d)
                with open(os.path.join(d, "kernel.json"), "rb") as fh:
                    blobs.append((code, fh.read()))
        det = blobs[0] == blobs[1] and blobs[0][0] == 0
        out["cli_deterministic"] = det
        return mono and hom <= 1e-12 and refine and det, out

    return _timed("property suites", 60, run)


CHECKS = (check_disk_center, check_mobius_covariance, check_p2_closed_forms, check_decreasing,
          check_isometry_roundtrip, check_profiles, check_positivity, check_dual_norm,
          check_extension, check_properties)


def run_all(verbose: bool = False, budget: float = 300.0):
    results = []
    t0 = time.perf_counter()
    for chk in CHECKS:
        r = chk()
        results.append(r)
        if verbose:
            print(r.line, flush=True)
    total = time.perf_counter() - t0
    results.append(CheckResult("full battery runtime", total <= budget, total, budget, {}))
    if verbose:
        print(results[-1].line, flush=True)
    return results
