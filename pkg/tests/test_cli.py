from __future__ import annotations

import json
import shutil
import subprocess

import pytest

from geolab import cli
from geolab.report import strip_timing


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def checks(out: str) -> dict:
    return {c["name"]: c for c in json.loads(out)["checks"]}


def test_obstruct_exp_einstein(capsys):
    code, out, _ = run_cli(capsys, "obstruct", "exp_einstein3.spec")
    assert code == 2
    c = checks(out)
    assert c["ricci_flat"]["verdict"] == "OBSTRUCTED" and c["ricci_flat"]["magnitude"] > 1e-3
    for name in ("parallel_ricci", "locally_symmetric"):
        assert c[name]["verdict"] == "INCONCLUSIVE" and c[name]["magnitude"] <= 1e-8
    assert json.loads(out)["status"] == "obstructed"


def test_wick_de_sitter(capsys):
    code, out, _ = run_cli(capsys, "wick", "desitter3.spec", "--field", "T", "--lambda", "1")
    assert code == 0
    res = [c for c in json.loads(out)["checks"] if c["kind"] == "residual"]
    assert {c["name"] for c in res} >= {"closedT", "bochner", "theorem3_form", "theorem3_constant_curvature"}
    assert all(c["residual"] <= 1e-8 for c in res)


def test_curvature_flat(capsys):
    code, out, _ = run_cli(capsys, "curvature", "flat2.spec", "--at", "x=0,y=0")
    assert code == 0
    c = checks(out)
    assert c["riemann"]["value"] == [[[[0.0] * 2] * 2] * 2] * 2
    assert c["scalar"]["value"] == 0.0 and c["ricci"]["value"] == [[0.0, 0.0], [0.0, 0.0]]
    assert "weyl" not in c


def test_curvature_with_lambda_and_expression_point(capsys):
    code, out, _ = run_cli(capsys, "curvature", "sphere2_semigeo", "--at", "r=pi/4,theta=0", "--lambda", "1")
    assert code == 0
    c = checks(out)
    assert c["riemann"]["value"][0][1][1][0] == pytest.approx(0.5)
    assert c["constant_curvature_residual"]["passed"] and c["einstein_residual"]["passed"]


def test_classify(capsys):
    _, out, _ = run_cli(capsys, "classify", "brinkmann_quadratic")
    c = checks(out)
    assert c["plane_wave"]["value"] and c["pp_wave"]["value"]
    _, out, _ = run_cli(capsys, "classify", "brinkmann_cubic")
    c = checks(out)
    assert c["pp_wave"]["value"] and not c["plane_wave"]["value"]
    assert c["slice_curvature"]["residual"] <= 1e-8


def test_penrose_pipeline(capsys):
    code, out, _ = run_cli(capsys, "penrose", "exp_einstein3", "--eps", "1,0.5,0.25")
    assert code == 0
    rep = json.loads(out)
    assert rep["all_passed"]
    c = checks(out)
    assert c["ricci_pw_vs_lambda_dr2"]["residual"] <= 1e-8
    assert c["brinkmann_isometry"]["residual"] <= 1e-6
    assert c["convergence_order"]["value"] >= 0.9


def test_report_schema(capsys):
    _, out, _ = run_cli(capsys, "wick", "flat3", "--lambda", "0")
    rep = json.loads(out)
    assert set(rep) == {"tool", "version", "schema", "command", "spec", "parameters", "checks", "all_passed", "status", "wall_time_s"}
    assert rep["tool"] == "geolab" and rep["command"] == "wick"
    assert rep["spec"]["input_digest"].startswith("sha256:")
    assert rep["parameters"]["seed"] == 0 and rep["parameters"]["samples"] == 32
    for c in rep["checks"]:
        assert c["kind"] in {"residual", "verdict", "value", "flag"}
        assert "name" in c


@pytest.mark.parametrize(
    "argv",
    [
        ["obstruct", "exp_einstein3", "--grid", "0:2:0.01"],
        ["wick", "example2_3d", "--samples", "8"],
        ["penrose", "exp_einstein3", "--samples", "4"],
    ],
)
def test_json_is_byte_deterministic(capsys, monkeypatch, argv):
    _, first, _ = run_cli(capsys, *argv)
    monkeypatch.setenv("GEOLAB_THREADS", "4")
    _, second, _ = run_cli(capsys, *argv)

    def without_time(text):
        return "\n".join(line for line in text.splitlines() if '"wall_time_s"' not in line)

    assert without_time(first) == without_time(second)
    assert strip_timing(first) == strip_timing(second)


def test_out_and_text_format(capsys, tmp_path):
    target = tmp_path / "r.txt"
    code, out, _ = run_cli(capsys, "classify", "brinkmann_quadratic", "--format", "text", "--out", str(target))
    assert code == 0 and out == ""
    text = target.read_text()
    assert "plane_wave" in text and "status ok" in text


def test_seed_changes_samples(capsys):
    _, a, _ = run_cli(capsys, "wick", "example2_3d", "--samples", "4", "--seed", "1")
    _, b, _ = run_cli(capsys, "wick", "example2_3d", "--samples", "4", "--seed", "2")
    assert checks(a)["unit"]["witness"] != checks(b)["unit"]["witness"]


@pytest.mark.parametrize(
    "argv, kind",
    [
        (["curvature", "no_such.spec"], "spec_error"),
        (["curvature", "flat2", "--at", "x=0"], "usage_error"),
        (["curvature", "flat2", "--at", "x=0,q=1"], "usage_error"),
        (["curvature", "flat2", "--at", "x=0,y=ln(-1)"], "domain_error"),
        (["wick", "flat2"], "usage_error"),
        (["wick", "desitter3", "--field", "S"], "usage_error"),
        (["obstruct", "exp_einstein3", "--grid", "0:2:0.3"], "grid_error"),
        (["classify", "desitter3"], "chart_shape"),
        (["penrose", "desitter3"], "chart_shape"),
        (["obstruct", "desitter3"], "chart_shape"),
        (["curvature", "example2_3d", "--at", "x1=-2,x2=0,x3=0"], "singular_metric"),
        (["bogus", "flat2"], "usage_error"),
        (["curvature", "flat2", "--samples", "x"], "usage_error"),
    ],
)
def test_errors_exit_one_with_json(capsys, argv, kind):
    code, out, err = run_cli(capsys, *argv) if argv[0] != "bogus" and "--samples" not in argv else _expect_exit(capsys, argv)
    assert code == 1 and out == ""
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["error"] == kind and payload["message"]


def _expect_exit(capsys, argv):
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    out, err = capsys.readouterr()
    return info.value.code, out, err


def test_spec_errors_report_line_and_column(capsys, tmp_path):
    p = tmp_path / "bad.spec"
    p.write_text('[metric]\ncoords = ["x", "y"]\ncomponents = [["1", "x"], ["y", "1"]]\n')
    code, _, err = run_cli(capsys, "curvature", str(p))
    payload = json.loads(err)
    assert code == 1 and payload["line"] == 3 and payload["column"] == 22


def test_not_closed_field_is_an_error(capsys, tmp_path):
    p = tmp_path / "rot.spec"
    p.write_text(
        '[metric]\ncoords = ["x", "y"]\ncomponents = [["1"], ["0", "1"]]\n'
        '[metric.domain]\nx = [0.5, 1.5]\ny = [0.5, 1.5]\n'
        '[fields.T]\ncomponents = ["-y/sqrt(x^2+y^2)", "x/sqrt(x^2+y^2)"]\n'
    )
    code, _, err = run_cli(capsys, "wick", str(p))
    assert code == 1 and json.loads(err)["error"] == "not_closed"


@pytest.mark.skipif(shutil.which("geolab") is None, reason="console script not installed")
def test_installed_console_script():
    proc = subprocess.run(["geolab", "obstruct", "exp_einstein3"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stdout)["status"] == "obstructed"
