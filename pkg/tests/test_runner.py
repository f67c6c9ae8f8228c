from __future__ import annotations

import copy
import json

import jsonschema
import numpy as np
import pytest

from quasiconv import runner
from quasiconv.errors import ConfigError, InsufficientData, NoSignChange

BASE = {
    "schema_version": 1,
    "name": "tiny",
    "nonlinearity": {"preset": "cubic"},
    "grid": {"L": 10, "h": 0.1},
    "solver": {"dt": 0.1, "T": 4, "snapshot_interval": 1},
    "u0": {"kind": "gaussian", "params": {"amplitude": 0.5, "scale": 2.0}},
    "checks": [{"name": "bounded", "lo": -1.05, "hi": 1.05}, {"name": "tail_regime", "expected": "T2"}],
}


def _cfg(**changes):
    cfg = copy.deepcopy(BASE)
    for path, value in changes.items():
        node = cfg
        keys = path.split("__")
        for k in keys[:-1]:
            node = node[k]
        if value is None:
            node.pop(keys[-1])
        else:
            node[keys[-1]] = value
    return cfg


@pytest.mark.parametrize("name", sorted(runner.canned_scenarios()))
def test_canned_scenarios_validate(name):
    cfg = json.loads(runner.canned_scenarios()[name].read_text())
    jsonschema.validate(cfg, runner.load_schema())
    assert runner.scenario_from_dict(cfg).name == name


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(runner.canned_scenarios()))
def test_canned_scenarios_pass(name):
    rep = runner.run_scenario(runner.load_scenario(runner.canned_scenarios()[name]))
    failed = [c.name for c in rep.checks if not c.passed]
    assert rep.exit_code == runner.EXIT_OK and not failed, failed


@pytest.mark.parametrize("changes, path", [
    ({"grid__h": -0.1}, "$.grid.h"),
    ({"name": "bad name"}, "$.name"),
    ({"solver__dt": "fast"}, "$.solver.dt"),
    ({"u0": None}, "$"),
    ({"checks": [{"name": "nonsense"}]}, "$.checks[0].name"),
])
def test_config_errors_name_the_field(changes, path):
    with pytest.raises(ConfigError) as info:
        runner.scenario_from_dict(_cfg(**changes))
    assert info.value.path == path


def test_config_error_from_semantics():
    with pytest.raises(ConfigError) as info:
        runner.scenario_from_dict(_cfg(solver__snapshots=[0, 2, 1], solver__snapshot_interval=None))
    assert info.value.path == "$.solver"


def test_load_scenario_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        runner.load_scenario(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ConfigError) as info:
        runner.load_scenario(bad)
    assert info.value.path.startswith(str(bad))


def test_with_parameter():
    s = runner.scenario_from_dict(_cfg())
    t = s.with_parameter("u0.params.amplitude", 0.7)
    assert t.config["u0"]["params"]["amplitude"] == 0.7 and s.config["u0"]["params"]["amplitude"] == 0.5
    assert t.config_hash != s.config_hash
    with pytest.raises(ConfigError):
        s.with_parameter("u0.nothing.here", 1.0)


def test_run_scenario_exit_codes():
    assert runner.run_scenario(runner.scenario_from_dict(_cfg())).exit_code == runner.EXIT_OK
    failing = _cfg(checks=[{"name": "tail_regime", "expected": "T1"}])
    rep = runner.run_scenario(runner.scenario_from_dict(failing))
    assert rep.exit_code == runner.EXIT_CHECK_FAILED and not rep.passed
    blow = _cfg(nonlinearity={"coeffs": [0.0, 1.0], "kappa": 2.0, "delta": 1.0},
                u0={"kind": "constant", "params": {"value": 1.0}}, solver__blowup_bound=3.0,
                solver__T=50)
    rep = runner.run_scenario(runner.scenario_from_dict(blow))
    assert rep.exit_code == runner.EXIT_NUMERICAL and "t=" in rep.error


def test_artifacts_are_byte_identical(tmp_path):
    s = runner.scenario_from_dict(_cfg())
    runner.run_scenario(s, tmp_path / "a", write_snapshots=True)
    runner.run_scenario(s, tmp_path / "b", write_snapshots=True)
    a, b = tmp_path / "a" / "tiny", tmp_path / "b" / "tiny"
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir()) and "manifest.json" in names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_trajectory_roundtrip(tmp_path):
    s = runner.scenario_from_dict(_cfg())
    tr = runner.simulate(s)
    runner.write_trajectory(tr, s, tmp_path)
    back, man = runner.read_trajectory(tmp_path)
    assert man["name"] == "tiny" and len(back) == len(tr)
    for p, q in zip(tr, back):
        assert p.t == q.t and np.array_equal(p.u, q.u) and np.array_equal(p.ut, q.ut)


THRESH = _cfg(
    nonlinearity={"preset": "unbalanced_cubic", "params": {"a": 0.3}},
    grid={"L": 40, "h": 0.1},
    solver={"dt": 0.1, "T": 200, "snapshot_interval": 1},
    u0={"kind": "gaussian", "params": {"amplitude": 0.5, "background": -0.3, "scale": 8.0}},
    checks=[],
    bisect={"parameter": "u0.params.amplitude", "range": [0.0, 1.5], "tol": 1e-2, "max_runs": 30},
)


def test_bisect_no_sign_change():
    s = runner.scenario_from_dict(THRESH)
    with pytest.raises(NoSignChange):
        runner.threshold_bisect(s, param_range=(0.0, 0.1))


def test_bisect_bracket_below_tol_runs_nothing():
    s = runner.scenario_from_dict(THRESH)
    res = runner.threshold_bisect(s, param_range=(0.5, 0.5 + 1e-9), tol=1e-6)
    assert res.runs == [] and res.threshold == pytest.approx(0.5)


def test_bisect_budget():
    s = runner.scenario_from_dict(THRESH)
    with pytest.raises(InsufficientData):
        runner.threshold_bisect(s, tol=1e-6, steps=4)


def test_bisect_coarse_bracket():
    s = runner.scenario_from_dict(THRESH)
    res = runner.threshold_bisect(s, compare=False)
    lo, hi = res.bracket
    assert hi - lo < 1e-2 and lo < res.threshold < hi
    outcomes = {r["parameter"]: r["outcome"] for r in res.runs}
    assert outcomes[0.0] == "down" and outcomes[1.5] == "up"
    assert len(res.runs) <= 30


def test_bisect_needs_homoclinic_loop():
    s = runner.scenario_from_dict(_cfg(bisect={"parameter": "u0.params.amplitude", "range": [0.0, 1.0]}))
    with pytest.raises(ConfigError):
        runner.threshold_bisect(s)
