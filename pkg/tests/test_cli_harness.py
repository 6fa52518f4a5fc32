import json
import subprocess
import sys

import numpy as np
import pytest

from cmcspheres.cli_harness import fit_quadratic, main, parse_xi_grid
from cmcspheres.errors import ConfigError


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def load(path):
    return json.loads(path.read_text())


def test_solve_leaf_schwarzschild(tmp_path, capsys):
    cfg = tmp_path / "m.toml"
    cfg.write_text('kind = "SchwarzschildIsotropic"\nmass = 1.0\n')
    code, out = run(tmp_path, "solve-leaf", "--metric", str(cfg), "--lambda", "50", "--lmax", "8")
    assert code == 0
    doc = load(out / "leaf.json")
    assert doc["kind"] == "leaf" and doc["schema_version"] == "1.0"
    leaf = doc["leaf"]
    assert leaf["mode"] == "critical_point"
    assert np.linalg.norm(leaf["xi"]) < 1e-8
    assert leaf["stability"]["verdict"] == "Stable"
    assert (out / "leaf_u.csv").read_text().startswith("theta,phi,value")
    assert json.loads(capsys.readouterr().out)["verdict"] == "Stable"


def test_flat_solve_leaf_uses_fixed_center(tmp_path):
    code, out = run(tmp_path, "solve-leaf", "--metric", "flat", "--lambda", "30", "--lmax", "6")
    assert code == 0
    leaf = load(out / "leaf.json")["leaf"]
    assert leaf["mode"] == "fixed_center"
    assert leaf["stability"]["verdict"] == "Marginal"


def test_invalid_config_exits_2_with_field(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('kind = "PerturbedSchwarzschild"\nmass = 1.0\ntau = 0.8\n[[perturbations]]\ndecay = 0.5\n')
    code, out = run(tmp_path, "solve-leaf", "--metric", str(cfg), "--lambda", "50")
    assert code == 2
    err = load(out / "error.json")["error"]
    assert err["type"] == "ConfigError"
    assert err["field"] == "perturbations[0].decay"
    assert json.loads(capsys.readouterr().out)["kind"] == "error"


def test_unknown_command_is_a_config_error(tmp_path, capsys):
    assert main(["frobnicate"]) == 2
    err = json.loads(capsys.readouterr().out)["error"]
    assert err["field"] == "argv"


def test_below_lambda_min_exits_1(tmp_path):
    code, out = run(tmp_path, "solve-leaf", "--metric", "schwarzschild_m1", "--lambda", "5")
    assert code == 1
    assert load(out / "error.json")["error"]["type"] == "DomainError"


def test_flux_outputs(tmp_path):
    code, out = run(tmp_path, "flux", "--metric", "translated_m1", "--lmax", "12")
    assert code == 0
    seq = load(out / "flux.json")["sequence"]
    assert seq["mass_limit"] == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(seq["com_limit"], [1.0, -0.5, 0.25], atol=1e-3)
    assert (out / "flux.csv").exists() and (out / "flux.gp").exists()


def test_gfit_coefficient(tmp_path):
    code, out = run(tmp_path, "gfit", "--metric", "schwarzschild_m1", "--lambda", "100",
                    "--xi-grid", "0.05:0.2:4", "--lmax", "8")
    assert code == 0
    doc = load(out / "gfit.json")
    assert 0.8 < doc["coefficient_over_4pi_m"] < 1.2
    assert len(doc["G"]) == 4


def test_verify_flat(tmp_path, capsys):
    code, out = run(tmp_path, "verify", "--metric", "flat", "--suite", "spectral,metric", "--lmax", "8")
    assert code == 0
    doc = load(out / "verify.json")
    assert doc["checks"] and all(c["passed"] for c in doc["checks"])
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines if line[:4] in ("PASS", "FAIL"))


def test_outputs_are_deterministic(tmp_path):
    argv = ["flux", "--metric", "schwarzschild_m1", "--lmax", "8", "--lambda", "25,50,100,200"]
    _, a = run(tmp_path, *argv, name="a")
    _, b = run(tmp_path, *argv, name="b")
    for f in ("flux.json", "flux.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "cmcspheres", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "solve-leaf" in res.stdout


def test_parse_xi_grid_and_fit():
    assert parse_xi_grid("0:1:5") == [0.0, 0.25, 0.5, 0.75, 1.0]
    with pytest.raises(ConfigError):
        parse_xi_grid("0:1")
    t = np.linspace(0, 0.5, 6)
    assert fit_quadratic(t, 2.0, 2.0 + 3.0 * t**2) == pytest.approx(3.0)
