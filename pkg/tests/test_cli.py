from __future__ import annotations

import json
import random

import numpy as np
import pytest

from quasiconv import cli

TINY = {
    "schema_version": 1,
    "name": "tiny",
    "nonlinearity": {"preset": "cubic"},
    "grid": {"L": 10, "h": 0.1},
    "solver": {"dt": 0.1, "T": 10, "snapshot_interval": 1},
    "u0": {"kind": "gaussian", "params": {"amplitude": 0.5, "scale": 2.0}},
    "window": 5,
    "checks": [{"name": "tail_regime", "expected": "T2"}],
}


@pytest.fixture()
def tiny(tmp_path):
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps(TINY))
    return p


def test_phase(tmp_path, capsys):
    assert cli.main(["phase", "--out", str(tmp_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["pi0"]["loop_kind"] == "heteroclinic"
    assert (tmp_path / "phase.json").exists() and (tmp_path / "loop.csv").exists()


def test_phase_unbalanced(capsys):
    assert cli.main(["phase", "--preset", "unbalanced_cubic", "--a", "0.3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["pi0"]["loop_kind"] == "homoclinic" and doc["pi0"]["p_hat"] == pytest.approx(-0.3)


def test_steady(tmp_path, capsys):
    assert cli.main(["steady", "--L", "10", "--out", str(tmp_path)]) == 0
    meta = json.loads(capsys.readouterr().out)
    assert meta["kind"] == "standing_wave" and meta["residual"] <= 1e-3
    rows = np.loadtxt(tmp_path / "standing_wave.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(rows[:, 1] - np.tanh(rows[:, 0] / np.sqrt(2)))) <= 1e-6


def test_steady_periodic_needs_p(capsys):
    assert cli.main(["steady", "--kind", "periodic"]) == 2


def test_simulate_sturm_omega(tmp_path, tiny, capsys):
    run_dir = tmp_path / "run"
    assert cli.main(["simulate", str(tiny), "--out", str(run_dir)]) == 0
    assert (run_dir / "manifest.json").exists()
    assert cli.main(["--out", str(tmp_path / "s"), "sturm", str(run_dir)]) == 0
    assert (tmp_path / "s" / "sturm.csv").exists()
    assert cli.main(["omega", str(run_dir), "--out", str(tmp_path / "o")]) == 0
    verdict = json.loads((tmp_path / "o" / "verdict.json").read_text())
    assert {"quasiconvergent", "convergent"} <= set(verdict)
    capsys.readouterr()


def test_scenario_list(capsys):
    assert cli.main(["scenario", "list"]) == 0
    names = capsys.readouterr().out.split()
    assert "front_cubic" in names and "zero" in names


def test_scenario_run_exit_codes(tmp_path, tiny, capsys):
    assert cli.main(["scenario", "run", str(tiny), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "tiny" / "report.json").exists()
    bad = dict(TINY, checks=[{"name": "tail_regime", "expected": "T1"}])
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    assert cli.main(["scenario", "run", str(tmp_path / "bad.json")]) == 1
    capsys.readouterr()


def test_config_error_exit_code(tmp_path, capsys):
    broken = dict(TINY, grid={"L": 10})
    p = tmp_path / "broken.json"
    p.write_text(json.dumps(broken))
    assert cli.main(["scenario", "run", str(p)]) == 2
    assert "$.grid" in capsys.readouterr().err
    assert cli.main(["simulate", "no_such_scenario"]) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    blow = dict(TINY, nonlinearity={"coeffs": [0.0, 1.0], "kappa": 2.0, "delta": 1.0},
                u0={"kind": "constant", "params": {"value": 1.0}},
                solver={"dt": 0.1, "T": 50, "blowup_bound": 3.0})
    p = tmp_path / "blow.json"
    p.write_text(json.dumps(blow))
    assert cli.main(["simulate", str(p), "--out", str(tmp_path / "r")]) == 3
    assert cli.main(["scenario", "run", str(p)]) == 3
    capsys.readouterr()


def test_seedless(tiny, tmp_path, capsys):
    assert cli.main(["--seedless", "simulate", str(tiny), "--out", str(tmp_path / "r")]) == 0
    assert cli.main(["--seedless", "phase"]) == 0
    capsys.readouterr()


def test_seedless_detects_rng_use(monkeypatch, capsys):
    monkeypatch.setattr(cli, "cmd_scenario_list", lambda args: random.random() and 0)
    assert cli.main(["scenario", "list"]) == 0
    assert cli.main(["--seedless", "scenario", "list"]) == 1
    capsys.readouterr()


def test_verify_subset(tmp_path, capsys):
    assert cli.main(["verify", "--only", "2,3", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "criterion  2" in out and "2/2 criteria passed" in out
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert [d["criterion"] for d in doc] == [2, 3]
