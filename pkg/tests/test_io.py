import math

import numpy as np
import pytest

from pberg import io as pio
from pberg._expr import ExpressionError, compile_expression
from pberg.domains import build_quadrature


def test_expression_evaluator():
    f = compile_expression("abs2(t) + re(t*z) - 0.5*pi", ("t", "z"))
    assert f(t=np.array([1j]), z=np.array([1j]))[0] == pytest.approx(1 - 1 - 0.5 * math.pi)
    g = compile_expression("(z - 0.3)/(1 - 0.3*z)", ("z",), real=False)
    assert g(z=np.array([0.3 + 0j]))[0] == 0


@pytest.mark.parametrize("bad", ["__import__('os')", "t.real", "foo(t)", "t[0]", "lambda: 1", "t +"])
def test_expression_rejects_unsafe(bad):
    with pytest.raises(ExpressionError):
        compile_expression(bad, ("t",))


@pytest.mark.parametrize("doc", [
    {"kind": "disk", "center": [0.5, -0.25], "radius": 2.0},
    {"kind": "ball", "dim": 3, "radius": 1.0},
    {"kind": "ellipse", "center": [0.0, 0.0], "semiaxes": [1.0, 0.5]},
    {"kind": "polydisk", "radii": [1.0, 0.5]},
    {"kind": "hartogs_fiber", "radius": 0.8},
])
def test_domain_json_roundtrip(doc):
    d = pio.domain_from_json(doc)
    assert pio.domain_from_json(pio.domain_to_json(d)) == d


def test_indicator_constraints():
    doc = {"kind": "indicator", "box": [[-1, 1, -1, 1]],
           "constraints": [{"type": "ball", "center": [0, 0], "radius": 1.0},
                           {"type": "halfspace", "normal": [1.0, 0.0], "offset": 0.0},
                           {"type": "expression", "expr": "abs2(z) - 0.9"}]}
    d = pio.domain_from_json(doc)
    pts = np.array([[-0.5 + 0j], [0.5 + 0j], [-0.97 + 0j]])
    assert d.contains(pts).tolist() == [True, False, False]
    assert build_quadrature(d, 32).total_weight() == pytest.approx(0.45 * math.pi, rel=0.05)


@pytest.mark.parametrize("doc", [{"radius": 1}, {"kind": "torus"}, {"kind": "disk", "radius": -1},
                                 {"kind": "disk", "center": "origin"}])
def test_domain_json_errors(doc):
    with pytest.raises(pio.SpecError):
        pio.domain_from_json(doc)


def test_family_tags():
    fam = pio.family_from_json({"fiber": {"kind": "hartogs", "u": "abs2"}, "m": 2,
                                "weight": "re_tz"})
    assert fam.m == 2 and fam.fiber_radius(0.3) == pytest.approx(math.exp(-0.09))
    assert fam.phi(0.5j, np.array([[2j]]))[0] == pytest.approx(-1.0)
    fam2 = pio.family_from_json({"fiber": {"kind": "product", "domain": {"kind": "disk"}}})
    assert fam2.kind == "product"
    with pytest.raises(pio.SpecError):
        pio.family_from_json({"fiber": {"kind": "hartogs", "u": "abs2"}, "m": 0})


def test_deterministic_json_and_csv():
    doc = {"b": 0.1, "a": [1 + 2j, np.float64(1 / 3)], "c": float("nan")}
    assert pio.dumps(doc) == pio.dumps(dict(reversed(list(doc.items()))))
    assert '"c": "nan"' in pio.dumps(doc)
    text = pio.csv_text(["x", "ok"], [[0.1, True]])
    assert text == "x,ok\n0.10000000000000001,true\n"


def test_write_atomic(tmp_path):
    p = tmp_path / "sub" / "f.txt"
    pio.write_atomic(str(p), "hello\n")
    assert p.read_text() == "hello\n"
    assert [x.name for x in p.parent.iterdir()] == ["f.txt"]
