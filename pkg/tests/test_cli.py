import csv
import json
import subprocess
import sys

import pytest

from pberg.cli import main, run_job


def _job(tmp_path, doc, name="job.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


KERNEL = {"command": "kernel", "domain": {"kind": "disk", "center": [0.0, 0.0], "radius": 1.0},
          "solver": {"p": 2, "degree": 30}, "point": [0.0, 0.0]}


def test_kernel_job(tmp_path):
    out = tmp_path / "out"
    assert main(["kernel", "--spec", _job(tmp_path, KERNEL), "--out", str(out)]) == 0
    doc = json.loads((out / "kernel.json").read_text())
    assert doc["kernel_value"] == pytest.approx(0.31831, abs=1e-5)
    assert doc["tol"] > 0 and doc["diagnostics"] == [] and doc["converged"] is True


def test_missing_p_exits_2_without_artifacts(tmp_path):
    bad = dict(KERNEL, solver={"degree": 30})
    out = tmp_path / "out"
    assert main(["kernel", "--spec", _job(tmp_path, bad), "--out", str(out)]) == 2
    assert not out.exists()


@pytest.mark.parametrize("mutate", [
    lambda j: j.update(point=[1.5, 0.0]),
    lambda j: j.update(domain={"kind": "nope"}),
    lambda j: j.update(command="profile"),
    lambda j: j["solver"].update(p=-1),
])
def test_validation_failures(tmp_path, mutate):
    job = json.loads(json.dumps(KERNEL))
    mutate(job)
    assert main(["kernel", "--spec", _job(tmp_path, job), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_malformed_json(tmp_path):
    p = tmp_path / "j.json"
    p.write_text("{not json")
    assert main(["kernel", "--spec", str(p), "--out", str(tmp_path / "o")]) == 2


def test_family_job(tmp_path):
    job = {"family": {"fiber": {"kind": "hartogs", "u": "abs2"}, "m": 1},
           "solver": {"degree": 20, "resolution": 32},
           "probe": {"centers": [[0.0, 0.0]], "radii": [0.3]}}
    out = tmp_path / "out"
    assert main(["family", "--spec", _job(tmp_path, job), "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "probe.csv").open()))
    assert float(rows[0]["margin"]) == pytest.approx(0.18, abs=1e-6)
    assert rows[0]["violated"] == "false" and float(rows[0]["tol"]) > 0
    assert list(rows[0])[:7] == ["t_center_re", "t_center_im", "radius", "field_center",
                                 "circle_mean", "margin", "violated"]


def test_family_job_tabulated_negative_control(tmp_path):
    job = {"family": {"fiber": {"kind": "hartogs", "u": "neg_abs2"}, "m": 1},
           "solver": {"degree": 10, "resolution": 16},
           "probe": {"centers": [[0.0, 0.0]], "radii": [0.3], "grid": {"half_width": 0.5, "n": 9}}}
    out = tmp_path / "out"
    assert main(["family", "--spec", _job(tmp_path, job), "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "probe.csv").open()))
    assert rows[0]["violated"] == "true"


def test_profile_job(tmp_path):
    job = {"domain": {"kind": "disk"}, "solver": {"p": 2, "degree": 60},
           "boundary_path": {"direction": [0.0, 1.0], "k_max": 3}}
    out = tmp_path / "out"
    assert main(["profile", "--spec", _job(tmp_path, job), "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "profile.csv").open()))
    assert [float(r["z_im"]) for r in rows] == [0.5, 0.75, 0.875]
    assert all(r["increasing"] == "true" for r in rows[1:])
    assert json.loads((out / "diagnostics.json").read_text())["strictly_increasing"]


def test_map_job(tmp_path):
    job = {"map": {"kind": "mobius", "a": [0.3, 0.0]}, "solver": {"p": 2, "degree": 40}}
    out = tmp_path / "out"
    assert main(["map", "--spec", _job(tmp_path, job), "--out", str(out)]) == 0
    doc = json.loads((out / "map.json").read_text())
    assert doc["sup_error"] < 1e-6 and doc["jacobian"]["max_residual"] < doc["tol"]


def test_map_job_expression_and_refusal(tmp_path):
    ok = {"map": {"kind": "expression", "f": "0.5*z", "jac": "0.5 + 0*z"}, "solver": {"p": 1, "degree": 10}}
    assert main(["map", "--spec", _job(tmp_path, ok), "--out", str(tmp_path / "a")]) == 0
    # a vanishing Jacobian is a refused precondition
    bad = {"map": {"kind": "expression", "f": "z", "jac": "0*z"}, "solver": {"p": 1, "degree": 10}}
    assert main(["map", "--spec", _job(tmp_path, bad), "--out", str(tmp_path / "b")]) == 4


def test_extend_job(tmp_path):
    job = {"family": {"fiber": {"kind": "product", "domain": {"kind": "disk"}}, "m": 1},
           "u": {"coeffs": [[0, 0], [1, 0]]}, "degrees": [4, 4], "resolution": 12}
    out = tmp_path / "out"
    assert main(["extend", "--spec", _job(tmp_path, job), "--out", str(out)]) == 0
    doc = json.loads((out / "extension.json").read_text())
    assert doc["ratio"] == pytest.approx(1.0, abs=1e-6)
    job["u"]["coeffs"] = [[0, 0]] * 6 + [[1, 0]]
    assert main(["extend", "--spec", _job(tmp_path, job), "--out", str(tmp_path / "x")]) == 2


def test_nonconvergence_exit_3(tmp_path):
    job = dict(KERNEL, solver={"p": 1.3, "degree": 20, "resolution": 32, "max_iter": 1, "tol": 1e-14},
               point=[0.5, 0.2])
    out = tmp_path / "out"
    assert main(["kernel", "--spec", _job(tmp_path, job), "--out", str(out)]) == 3
    assert json.loads((out / "kernel.json").read_text())["converged"] is False


@pytest.mark.parametrize("threads", [1, 3])
def test_determinism_across_runs_and_threads(tmp_path, threads):
    job = {"domain": {"kind": "ellipse", "semiaxes": [1, 0.5]}, "solver": {"p": 1, "degree": 12},
           "path": [[0, 0], [0.3, 0], [0.6, 0.1]]}
    blobs = []
    for i in range(2):
        out = tmp_path / f"o{i}"
        assert run_job("profile", json.loads(json.dumps(job)), str(out), threads if i else 1) == 0
        blobs.append((out / "profile.csv").read_bytes() + (out / "diagnostics.json").read_bytes())
    assert blobs[0] == blobs[1]


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "pberg.cli", "kernel", "--spec", _job(tmp_path, KERNEL),
                        "--out", str(tmp_path / "o")], capture_output=True)
    assert r.returncode == 0


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("PBERG_THREADS", "2")
    assert main(["kernel", "--spec", _job(tmp_path, KERNEL), "--out", str(tmp_path / "o")]) == 0
    monkeypatch.setenv("PBERG_THREADS", "many")
    assert main(["kernel", "--spec", _job(tmp_path, KERNEL), "--out", str(tmp_path / "o")]) == 2


@pytest.mark.slow
def test_check_flag_writes_report(tmp_path):
    assert main(["--check", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "check.json").read_text())
    assert all(r["passed"] for r in report)
