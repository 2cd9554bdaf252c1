"""JSON readers/writers for domains, weights, families and numeric artifacts.

Complex scalars are ``[re, im]`` pairs; a point in C^n is a list of n pairs
(a single pair is accepted when n = 1).
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile

import numpy as np

from ._expr import compile_expression
from .domains import Domain, DomainError, ball, disk, ellipse, hartogs_fiber, indicator, polydisk
from .extremal import Weight
from .variation import DomainFamily


class SpecError(ValueError):
    """Malformed job or object description."""


# -- scalars and points -------------------------------------------------------


def complex_from_json(v) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(float(v), 0.0)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(float(v[0]), float(v[1]))
    raise SpecError(f"expected a number or an [re, im] pair, got {v!r}")


def complex_to_json(z) -> list:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def point_from_json(v, dim: int) -> np.ndarray:
    if dim == 1 and not (isinstance(v, list) and v and isinstance(v[0], list)):
        return np.array([complex_from_json(v)])
    if not isinstance(v, list) or len(v) != dim:
        raise SpecError(f"expected a point with {dim} complex coordinates, got {v!r}")
    return np.array([complex_from_json(x) for x in v])


def points_from_json(v, dim: int) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise SpecError("expected a non-empty list of points")
    return np.array([point_from_json(x, dim) for x in v])


def _require(doc: dict, key: str, where: str):
    if not isinstance(doc, dict) or key not in doc:
        raise SpecError(f"{where}: missing required field {key!r}")
    return doc[key]


def _positive(v, name):
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise SpecError(f"{name} must be a number") from None
    if not x > 0:
        raise SpecError(f"{name} must be positive")
    return x


# -- domains ------------------------------------------------------------------


def _constraint(doc: dict, dim: int):
    kind = _require(doc, "type", "constraint")
    if kind == "ball":
        c = point_from_json(doc.get("center", [[0.0, 0.0]] * dim if dim > 1 else [0.0, 0.0]), dim)
        r = _positive(_require(doc, "radius", "ball constraint"), "radius")
        return lambda z: np.sum(np.abs(z - c) ** 2, axis=1) < r * r
    if kind == "halfspace":
        # real-linear: normal . (Re z_1, Im z_1, ..., Re z_n, Im z_n) < offset
        nrm = np.asarray(_require(doc, "normal", "halfspace constraint"), dtype=float)
        if nrm.shape != (2 * dim,):
            raise SpecError(f"halfspace normal must have {2 * dim} real entries")
        off = float(doc.get("offset", 0.0))
        return lambda z: np.stack([z.real, z.imag], axis=2).reshape(z.shape[0], -1) @ nrm < off
    if kind == "expression":
        names = ("z",) if dim == 1 else tuple(f"z{j + 1}" for j in range(dim))
        fn = compile_expression(_require(doc, "expr", "expression constraint"), names)
        return lambda z: fn(**{n: z[:, j] for j, n in enumerate(names)}) < 0
    raise SpecError(f"unknown constraint type {kind!r}")


def domain_from_json(doc: dict) -> Domain:
    kind = _require(doc, "kind", "domain")
    try:
        if kind == "disk":
            return disk(_positive(doc.get("radius", 1.0), "radius"),
                        complex_from_json(doc.get("center", [0.0, 0.0])))
        if kind == "ball":
            return ball(int(doc.get("dim", 2)), _positive(doc.get("radius", 1.0), "radius"))
        if kind == "ellipse":
            a, b = doc.get("semiaxes", (doc.get("a"), doc.get("b")))
            return ellipse(_positive(a, "a"), _positive(b, "b"),
                           complex_from_json(doc.get("center", [0.0, 0.0])))
        if kind == "polydisk":
            return polydisk([_positive(r, "radius") for r in _require(doc, "radii", "polydisk")])
        if kind == "hartogs_fiber":
            return hartogs_fiber(_positive(_require(doc, "radius", "hartogs_fiber"), "radius"))
        if kind == "indicator":
            box = _require(doc, "box", "indicator")
            dim = len(box)
            tests = [_constraint(c, dim) for c in _require(doc, "constraints", "indicator")]

            def member(z, tests=tests):
                ok = np.ones(z.shape[0], dtype=bool)
                for t in tests:
                    ok &= t(z)
                return ok

            return indicator(box, member, bool(doc.get("simply_connected", False)))
    except DomainError as exc:
        raise SpecError(str(exc)) from None
    raise SpecError(f"unknown domain kind {kind!r}")


def domain_to_json(d: Domain) -> dict:
    if d.kind == "disk":
        return {"kind": "disk", "center": complex_to_json(d.center), "radius": d.radius}
    if d.kind == "ball":
        return {"kind": "ball", "dim": d.dim, "radius": d.radius}
    if d.kind == "ellipse":
        return {"kind": "ellipse", "center": complex_to_json(d.center),
                "semiaxes": list(d.semiaxes)}
    if d.kind == "polydisk":
        return {"kind": "polydisk", "radii": list(d.radii)}
    if d.kind == "hartogs_fiber":
        return {"kind": "hartogs_fiber", "radius": d.radius}
    # membership callables do not serialize
    return {"kind": "indicator", "box": [list(b) for b in d.box],
            "simply_connected": d.simply_connected}


# -- weights and families ---------------------------------------------------------

_U_TAGS = {"abs2": "abs2(t)", "re": "re(t)", "neg_abs2": "-abs2(t)", "zero": "0*re(t)"}
_PHI_TAGS = {"zero": None, "re_tz": "re(t*z)", "abs2": "abs2(z)"}


def weight_from_json(spec, dim: int = 1) -> Weight:
    """Fixed-domain weight phi(z): null/"zero" or an expression in z (z1..zn if n > 1)."""
    if spec is None or spec == "zero":
        return Weight()
    text = spec.get("expr") if isinstance(spec, dict) else spec
    if not isinstance(text, str):
        raise SpecError("weight must be null, 'zero' or an expression string")
    names = ("z",) if dim == 1 else tuple(f"z{j + 1}" for j in range(dim))
    fn = compile_expression(text, names)
    return Weight(lambda z: fn(**{n: z[:, j] for j, n in enumerate(names)}), name=text)


def _family_phi(spec):
    if spec is None:
        return None
    text = spec.get("expr") if isinstance(spec, dict) else spec
    text = _PHI_TAGS.get(text, text)
    if text is None:
        return None
    fn = compile_expression(text, ("t", "z"))

    def phi(t, z):
        z = np.asarray(z)
        z = z[:, 0] if z.ndim == 2 else z
        return np.broadcast_to(fn(t=t, z=z), z.shape)

    phi.source = text
    return phi


def family_from_json(doc: dict) -> DomainFamily:
    fiber = _require(doc, "fiber", "family")
    kind = _require(fiber, "kind", "family fiber")
    m = doc.get("m", 1)
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise SpecError("m must be a positive integer")
    par = doc.get("parameter", {})
    center = complex_from_json(par.get("center", [0.0, 0.0]))
    radius = _positive(par.get("radius", 1.0), "parameter radius")
    phi = _family_phi(doc.get("weight"))
    psh = bool(doc.get("declared_psh", True))
    if kind == "hartogs":
        text = _require(fiber, "u", "hartogs fiber")
        ufn = compile_expression(_U_TAGS.get(text, text), ("t",))
        return DomainFamily(m=m, u=lambda t: ufn(t=np.asarray(t)), phi=phi,
                            parameter_center=center, parameter_radius=radius,
                            declared_psh=psh, name=text)
    if kind == "product":
        dom = domain_from_json(_require(fiber, "domain", "product fiber"))
        if dom.dim != 1 and phi is not None:
            raise SpecError("family weights are implemented for one-dimensional fibers")
        return DomainFamily(m=m, fiber_domain=dom, phi=phi, parameter_center=center,
                            parameter_radius=radius, declared_psh=psh, name=dom.kind)
    raise SpecError(f"unknown fiber kind {kind!r}")


# -- artifacts ----------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else repr(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return complex_to_json(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip floats, non-finite as strings."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
