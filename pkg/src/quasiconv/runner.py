"""Scenario files, the check registry, threshold bisection and artifact output.

A scenario is one JSON document (see ``data/scenario.schema.json``) naming a
nonlinearity, a grid, a solver schedule, an initial datum and a list of
checks. Everything is deterministic: artifacts depend only on the scenario
content, never on wall-clock time or random state.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import jsonschema
import numpy as np

from . import nonlinearity as nl
from .asymptotics import (
    L_OBS,
    RADIUS,
    OmegaEstimate,
    check_entire_window,
    classify_tail,
    entire_window,
    omega_estimate,
    quasiconvergence_verdict,
    shift_fit,
    spatial_trajectory,
    trajectory_in_component,
)
from .errors import ConfigError, InsufficientData, NoSignChange, NumericalFailure
from .nonlinearity import Nonlinearity
from .pde_solver import (
    Grid,
    SolutionState,
    SolverConfig,
    Trajectory,
    boundary_theta,
    conserved_region_check,
    make_initial,
    run,
)
from .phase_portrait import PiComponent, component_Pi0, distance_to_polyline
from .steady_states import default_grid, ground_state, standing_waves
from .sturm import critical_points, monotonicity_audit, reflection_zero_count, shifted_zero_count

__all__ = [
    "Scenario",
    "CheckResult",
    "ScenarioReport",
    "BisectResult",
    "load_schema",
    "load_scenario",
    "scenario_from_dict",
    "canned_scenarios",
    "build_nonlinearity",
    "simulate",
    "evaluate",
    "run_scenario",
    "threshold_bisect",
    "write_trajectory",
    "read_trajectory",
    "EXIT_OK",
    "EXIT_CHECK_FAILED",
    "EXIT_CONFIG",
    "EXIT_NUMERICAL",
]

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

_PRESETS = {
    "cubic": nl.cubic,
    "unbalanced_cubic": nl.unbalanced_cubic,
    "pure_linear": nl.pure_linear,
}


# ---------------------------------------------------------------------------
# configuration


def load_schema() -> dict:
    return json.loads(resources.files("quasiconv").joinpath("data/scenario.schema.json").read_text())


def _json_path(err: jsonschema.ValidationError) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


@dataclass(frozen=True)
class Scenario:
    name: str
    config: dict
    nonlinearity: Nonlinearity
    grid: Grid
    solver: SolverConfig
    window: float = L_OBS
    checks: tuple[dict, ...] = ()

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_parameter(self, path: str, value: float) -> "Scenario":
        """Copy with one dotted config entry replaced (e.g. ``u0.params.amplitude``)."""
        cfg = copy.deepcopy(self.config)
        node = cfg
        keys = path.split(".")
        for k in keys[:-1]:
            if k not in node or not isinstance(node[k], dict):
                raise ConfigError(f"$.{path}", "parameter path does not exist")
            node = node[k]
        node[keys[-1]] = value
        return scenario_from_dict(cfg)


def build_nonlinearity(spec: dict) -> Nonlinearity:
    if "preset" in spec:
        return _PRESETS[spec["preset"]](**spec.get("params", {}))
    return Nonlinearity.from_dict(spec)


def scenario_from_dict(cfg: dict) -> Scenario:
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as e:
        raise ConfigError(_json_path(e), e.message) from None
    try:
        n = build_nonlinearity(cfg["nonlinearity"])
    except (TypeError, ValueError) as e:
        raise ConfigError("$.nonlinearity", str(e)) from None
    g = cfg["grid"]
    grid = Grid.symmetric(g["L"], g["h"]) if "h" in g else Grid(-g["L"], g["L"], g["n"])
    s = cfg["solver"]
    extra = {k: s[k] for k in ("blowup_bound", "pin_zero") if k in s}
    try:
        if "snapshots" in s:
            solver = SolverConfig(s["dt"], s["T"], tuple(s["snapshots"]), **extra)
        else:
            solver = SolverConfig.every(s["dt"], s["T"], s.get("snapshot_interval", s["T"]), **extra)
    except ValueError as e:
        raise ConfigError("$.solver", str(e)) from None
    return Scenario(cfg["name"], cfg, n, grid, solver, float(cfg.get("window", L_OBS)),
                    tuple(cfg.get("checks", ())))


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(str(path), e.strerror or str(e)) from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}", e.msg) from None
    return scenario_from_dict(cfg)


def canned_scenarios() -> dict[str, Path]:
    root = resources.files("quasiconv").joinpath("data/scenarios")
    return {Path(str(p)).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".json")}


# ---------------------------------------------------------------------------
# execution


def simulate(s: Scenario, stop: Callable[[SolutionState], bool] | None = None) -> Trajectory:
    try:
        u0 = make_initial(s.grid, s.config["u0"])
    except (KeyError, ValueError) as e:
        raise ConfigError("$.u0", str(e)) from None
    return run(s.nonlinearity, u0, s.solver, stop)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)


@dataclass
class ScenarioReport:
    name: str
    config_hash: str
    checks: list[CheckResult]
    artifacts: list[str] = field(default_factory=list)
    exit_code: int = EXIT_OK
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.exit_code == EXIT_OK

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "config_hash": self.config_hash,
            "exit_code": self.exit_code,
            "error": self.error,
            "checks": [{"name": c.name, "passed": c.passed, "details": c.details} for c in self.checks],
            "artifacts": self.artifacts,
        }


class _Context:
    """Lazily computed analyses shared between the checks of one scenario."""

    def __init__(self, s: Scenario, traj: Trajectory):
        self.s, self.traj, self.n = s, traj, s.nonlinearity
        self._omega: OmegaEstimate | None = None
        self._pi0: PiComponent | None = None
        a = s.config.get("analysis", {})
        self.burn_in = a.get("burn_in")
        self.radius = a.get("radius", RADIUS)
        self.zero_band = a.get("zero_band", 1e-8)

    @property
    def omega(self) -> OmegaEstimate:
        if self._omega is None:
            self._omega = omega_estimate(self.traj, self.s.window, self.burn_in, self.radius, self.n)
        return self._omega

    @property
    def pi0(self) -> PiComponent:
        if self._pi0 is None:
            self._pi0 = component_Pi0(self.n)
        return self._pi0


def _check_all_zero(c: _Context, tol: float = 0.0):
    m = max(float(np.max(np.abs(st.u))) for st in c.traj)
    return m <= tol, {"max_abs_u": m}


def _check_bounded(c: _Context, lo: float, hi: float, tol: float = 1e-8):
    ok = conserved_region_check(c.traj, lo, hi, c.n, tol)
    return ok, {"min": min(float(st.u.min()) for st in c.traj), "max": max(float(st.u.max()) for st in c.traj)}


def _verdict(c: _Context, res_tol: float, ut_tol: float):
    v = quasiconvergence_verdict(c.omega, res_tol, ut_tol)
    return v, dict(v.evidence, quasiconvergent=v.quasiconvergent, convergent=v.convergent)


def _check_quasiconvergent(c: _Context, res_tol: float = 1e-3, ut_tol: float = 1e-3):
    v, d = _verdict(c, res_tol, ut_tol)
    return v.quasiconvergent, d


def _check_convergent(c: _Context, res_tol: float = 1e-3, ut_tol: float = 1e-3):
    v, d = _verdict(c, res_tol, ut_tol)
    return v.convergent, d


def _check_front_shift(c: _Context, tol: float = 1e-2):
    plus, minus = standing_waves(c.n, c.pi0, default_grid(c.s.window + 15.0, 0.01))
    rep = c.omega.clusters[-1].representative
    ref = plus if rep.theta_plus > rep.theta_minus else minus
    mu, err = shift_fit(rep.x, rep.u, ref, c.s.window)
    return err <= tol, {"shift": mu, "error": err}


_SCENARIO = "scenario"


def _critical_series(c: _Context, window=_SCENARIO):
    # window=None counts on the whole computational interior
    w = c.s.window if window == _SCENARIO else window
    return [critical_points(st, window=w) for st in c.traj]


def _check_critical_points_bounded(c: _Context, max_count: int = 100, window=_SCENARIO):
    """Critical-point counts: finite, bounded, constant after burn-in."""
    reps = _critical_series(c, window)
    t = c.traj.times
    burn = 0.5 * t[-1] if c.burn_in is None else c.burn_in
    counts = [r.count for r in reps]
    late = {r.count for r, ti in zip(reps, t) if ti >= burn}
    ok = not any(r.degenerate for r in reps) and max(counts) <= max_count and len(late) == 1
    return ok, {"max_count": max(counts), "late_counts": sorted(late)}


def _audit(reports, times, skip):
    a = monotonicity_audit(reports, times, skip)
    return a.nonincreasing, {"drop_times": list(a.drop_times), "violations": list(a.violations),
                             "excluded": len(a.excluded_times), "final_count": a.counts[-1] if a.counts else None}


def _check_zux(c: _Context, skip: int = 1, window=_SCENARIO):
    return _audit(_critical_series(c, window), c.traj.times, skip)


def _check_zshift(c: _Context, skip: int = 1):
    reps = [shifted_zero_count(st, st.theta_plus, window=c.s.window) for st in c.traj]
    return _audit(reps, c.traj.times, skip)


def _check_reflection(c: _Context, lambdas=(-5.0, 0.0, 5.0)):
    counts = {}
    for lam in lambdas:
        rs = [reflection_zero_count(st, float(lam), window=c.s.window) for st in c.traj]
        counts[str(lam)] = max(r.count for r in rs if not r.degenerate) if any(not r.degenerate for r in rs) else 0
    ok = all(math.isfinite(v) for v in counts.values())
    return ok, {"max_counts": counts}


def _check_tail(c: _Context, expected: str):
    tc = classify_tail(c.traj, c.zero_band)
    return tc.regime == expected, {"regime": tc.regime}


def _check_entire_window(c: _Context, t_center: float, half_width: float):
    wc = check_entire_window(entire_window(c.traj, t_center, half_width), c.s.window)
    return wc.all, {"ci": wc.ci, "cii": wc.cii, "ciii": wc.ciii, "civ": wc.civ,
                    "max_critical_points": wc.max_critical_points, "regime": wc.regime}


def _check_containment(c: _Context, tol: float = 1e-2):
    worst = 0.0
    for st in c.traj:
        r = trajectory_in_component(spatial_trajectory(st, c.s.window), c.pi0, 1e-6)
        worst = max(worst, r.max_outside_distance)
    return worst <= tol, {"max_outside_distance": worst}


def _check_boundary(c: _Context, tol: float = 1e-3, theta_tol: float = 1e-6):
    s0 = c.traj[0]
    th_err, adj = 0.0, 0.0
    for st in c.traj:
        for th0, th, nb in ((s0.theta_minus, st.theta_minus, st.u[1]), (s0.theta_plus, st.theta_plus, st.u[-2])):
            th_err = max(th_err, abs(th - boundary_theta(c.n, th0, st.t)))
            adj = max(adj, abs(nb - th))
    return th_err <= theta_tol and adj <= tol, {"theta_error": th_err, "adjacent_deviation": adj}


CHECKS: dict[str, Callable] = {
    "all_zero": _check_all_zero,
    "bounded": _check_bounded,
    "quasiconvergent": _check_quasiconvergent,
    "convergent": _check_convergent,
    "front_shift": _check_front_shift,
    "critical_points_bounded": _check_critical_points_bounded,
    "zux_nonincreasing": _check_zux,
    "zshift_nonincreasing": _check_zshift,
    "reflection_finite": _check_reflection,
    "tail_regime": _check_tail,
    "entire_window": _check_entire_window,
    "containment": _check_containment,
    "boundary_consistency": _check_boundary,
}


def evaluate(s: Scenario, traj: Trajectory) -> list[CheckResult]:
    ctx = _Context(s, traj)
    out = []
    for i, chk in enumerate(s.checks):
        args = {k: v for k, v in chk.items() if k != "name"}
        try:
            ok, details = CHECKS[chk["name"]](ctx, **args)
        except TypeError as e:
            raise ConfigError(f"$.checks[{i}]", str(e)) from None
        except (InsufficientData, ValueError) as e:
            ok, details = False, {"error": str(e)}
        out.append(CheckResult(chk["name"], bool(ok), _plain(details)))
    return out


def _plain(obj):
    """JSON-ready copy with numpy scalars converted."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# artifacts


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectory(traj: Trajectory, s: Scenario, out: Path) -> list[str]:
    """One CSV per snapshot plus ``manifest.json``; returns the file names written."""
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, st in enumerate(traj):
        name = f"snapshot_{k:05d}.csv"
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "u", "ux", "ut"])
            for row in zip(st.x, st.u, st.ux, st.ut):
                w.writerow([_fmt(v) for v in row])
        files.append(name)
    manifest = {
        "name": s.name,
        "config_hash": s.config_hash,
        "solver_hash": traj.config_hash,
        "nonlinearity": s.nonlinearity.to_dict(),
        "grid": {"x_min": s.grid.x_min, "x_max": s.grid.x_max, "n": s.grid.n},
        "window": s.window,
        "snapshots": [{"t": st.t, "theta_minus": st.theta_minus, "theta_plus": st.theta_plus, "file": f}
                      for st, f in zip(traj, files)],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return files + ["manifest.json"]


def read_trajectory(run_dir: str | Path) -> tuple[Trajectory, dict]:
    run_dir = Path(run_dir)
    path = run_dir / "manifest.json" if run_dir.is_dir() else run_dir
    try:
        man = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(str(path), e.strerror or str(e)) from None
    g = man["grid"]
    grid = Grid(g["x_min"], g["x_max"], g["n"])
    states = []
    for snap in man["snapshots"]:
        data = np.loadtxt(path.parent / snap["file"], delimiter=",", skiprows=1, ndmin=2)
        states.append(SolutionState(float(snap["t"]), grid, data[:, 1], data[:, 2], data[:, 3]))
    return Trajectory(states, man.get("solver_hash", ""), Nonlinearity.from_dict(man["nonlinearity"])), man


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def run_scenario(s: Scenario, out: str | Path | None = None, write_snapshots: bool = False) -> ScenarioReport:
    """Simulate, evaluate every check and (optionally) write artifacts under ``out/<name>``."""
    try:
        traj = simulate(s)
        checks = evaluate(s, traj)
    except NumericalFailure as e:
        return ScenarioReport(s.name, s.config_hash, [], exit_code=EXIT_NUMERICAL, error=str(e))
    except ConfigError as e:
        return ScenarioReport(s.name, s.config_hash, [], exit_code=EXIT_CONFIG, error=str(e))
    code = EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK_FAILED
    rep = ScenarioReport(s.name, s.config_hash, checks, exit_code=code)
    if out is not None:
        d = Path(out) / s.name
        d.mkdir(parents=True, exist_ok=True)
        if write_snapshots:
            rep.artifacts.extend(write_trajectory(traj, s, d))
        with open(d / "theta.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "theta_minus", "theta_plus"])
            for st in traj:
                w.writerow([_fmt(st.t), _fmt(st.theta_minus), _fmt(st.theta_plus)])
        rep.artifacts.append("theta.csv")
        rep.artifacts.append("report.json")
        _write_json(d / "report.json", rep.to_dict())
    return rep


# ---------------------------------------------------------------------------
# threshold bisection


@dataclass
class BisectResult:
    threshold: float
    bracket: tuple[float, float]
    runs: list[dict]
    comparison: dict | None = None
    midpoint_trajectory: Trajectory | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return _plain({"threshold": self.threshold, "bracket": list(self.bracket),
                       "runs": self.runs, "comparison": self.comparison})


class _Classifier:
    """Outcome of a run started near the ground-state separatrix.

    ``up``: the region where u exceeds the midpoint between the top of the
    ground state and the next stable zero is at least ``up_width`` long (a
    spreading plateau). ``down``: the bump has collapsed to within
    ``down_fraction * (q_hat - gamma)`` of the background.
    """

    def __init__(self, n: Nonlinearity, pi0: PiComponent, up_width: float, down_fraction: float):
        g, q = pi0.p_hat, pi0.q_hat
        if pi0.loop_kind != "homoclinic":
            raise ConfigError("$.nonlinearity", "threshold bisection needs a homoclinic outer loop")
        gamma = pi0.outer_orbit.limit_equilibria[0]
        top = q if gamma < q else g
        above = [r for r in n.roots.saddles() if r > top] if gamma < top else [r for r in n.roots.saddles() if r < top]
        far = (min(above) if gamma < top else max(above)) if above else top + (top - gamma)
        self.gamma, self.top, self.sign = gamma, top, (1.0 if gamma < top else -1.0)
        self.up_level = 0.5 * (top + far)
        self.up_width = up_width
        self.down_gap = down_fraction * abs(top - gamma)

    def __call__(self, st: SolutionState) -> str | None:
        w = self.sign * (st.u - self.up_level)
        if np.count_nonzero(w > 0) * st.grid.h >= self.up_width:
            return "up"
        if float(np.max(self.sign * (st.u - self.gamma))) < self.down_gap:
            return "down"
        return None


def threshold_bisect(s: Scenario, param_range=None, steps: int | None = None, tol: float | None = None,
                     parameter: str | None = None, compare: bool = True) -> BisectResult:
    """Bisect a scalar initial-datum parameter across the decay / spreading threshold.

    Each run stops as soon as its outcome is decided. The ends of the bracket
    must classify differently (``NoSignChange`` otherwise). A bracket that is
    already narrower than ``tol`` is returned as is, with no runs. With
    ``compare``, the run at the final midpoint is compared to the ground
    state on its transient plateau (the snapshot with the smallest
    ``sup |u_t|`` on the window).
    """
    b = s.config.get("bisect", {})
    lo, hi = (float(v) for v in (param_range if param_range is not None else b["range"]))
    tol = float(tol if tol is not None else b.get("tol", 1e-4))
    steps = int(steps if steps is not None else b.get("max_runs", 30))
    parameter = parameter or b.get("parameter", "u0.params.amplitude")
    if not hi > lo:
        raise ValueError("empty parameter range")
    if hi - lo < tol:
        return BisectResult(0.5 * (lo + hi), (lo, hi), [])
    n = s.nonlinearity
    pi0 = component_Pi0(n)
    cls = _Classifier(n, pi0, float(b.get("up_width", 10.0)), float(b.get("down_fraction", 1e-2)))
    runs: list[dict] = []

    def outcome(p):
        if len(runs) >= steps:
            raise InsufficientData(f"run budget of {steps} exhausted before the bracket reached {tol:g}")
        sc = s.with_parameter(parameter, p)
        tr = simulate(sc, stop=lambda st: cls(st) is not None)
        res = cls(tr[-1])
        runs.append({"parameter": p, "outcome": res or "undecided", "t_end": tr[-1].t})
        if res is None:
            raise InsufficientData(f"run at {parameter}={p!r} undecided by T={tr[-1].t:g}")
        return res, tr

    o_lo, _ = outcome(lo)
    o_hi, _ = outcome(hi)
    if o_lo == o_hi:
        raise NoSignChange(f"both ends of [{lo}, {hi}] classify as {o_lo!r}")
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        o, _ = outcome(mid)
        if o == o_lo:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    result = BisectResult(mid, (lo, hi), runs)
    if compare:
        tr = simulate(s.with_parameter(parameter, mid), stop=lambda st: cls(st) is not None)
        result.comparison = _compare_ground_state(s, tr, pi0, cls)
        result.midpoint_trajectory = tr
    return result


def _compare_ground_state(s: Scenario, tr: Trajectory, pi0: PiComponent, cls: _Classifier) -> dict:
    n = s.nonlinearity
    m = tr.grid.window_mask(s.window)
    late = [st for st in tr if st.t > 0]
    ut = np.array([float(np.max(np.abs(st.ut[m]))) for st in late])
    k = int(np.argmin(ut))
    st = late[k]
    phi = ground_state(n, pi0, default_grid(s.window + 15.0, 0.01))
    mu, err = shift_fit(st.x, st.u, phi, s.window)
    curve = spatial_trajectory(st, s.window)
    dist = float(np.max(distance_to_polyline(pi0.lambda_out.boundary, curve.points)))
    cont = trajectory_in_component(curve, pi0, 1e-6)
    ref = np.interp(st.x[m] - mu, phi.xs, phi.phi)
    # snapshots within 1e-2 of the fitted ground state
    plateau = [q.t for q in late if np.max(np.abs(q.u[m] - ref)) <= 1e-2]
    return {
        "plateau_time": st.t,
        "plateau_ut_sup": float(ut[k]),
        "shift": mu,
        "distance_to_ground_state": err,
        "max_distance_to_loop": dist,
        "max_outside_distance": cont.max_outside_distance,
        "plateau_interval": [min(plateau), max(plateau)] if plateau else None,
        "outcome": cls(tr[-1]) or "undecided",
    }
