"""The acceptance portfolio: ten numbered criteria with their tolerances.

Each ``criterion_k`` returns a :class:`CriterionResult`; ``verify_all`` runs
them (optionally in a process pool) and ``format_table`` lays out a
deterministic summary. The heavy PDE runs behind criteria 5-8 are cached
per process so that the Sturm audits reuse them.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from . import nonlinearity as nl
from .pde_solver import Grid, SolverConfig, make_initial, run
from .phase_portrait import component_Pi0, distance_to_polyline, minimal_period, periodic_orbit_at
from .runner import (
    _Context,
    _check_reflection,
    _check_zshift,
    _check_zux,
    canned_scenarios,
    evaluate,
    load_scenario,
    simulate,
    threshold_bisect,
)
from .steady_states import default_grid, profile_from_orbit

__all__ = ["CriterionResult", "CRITERIA", "verify_all", "format_table", "run_criterion"]


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    runtime: float = 0.0
    time_limit: float = math.inf

    @property
    def within_time(self) -> bool:
        return self.runtime < self.time_limit

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_short(v)}" for k, v in self.metrics.items())
        return f"[{status}] criterion {self.number:2d}: {self.title} ({shown})"


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def _timed(number: int, title: str, limit: float, body: Callable[[], tuple[bool, dict]]) -> CriterionResult:
    t0 = time.perf_counter()
    ok, metrics = body()
    dt = time.perf_counter() - t0
    return CriterionResult(number, title, bool(ok and dt < limit), metrics, dt, limit)


# ---------------------------------------------------------------------------
# shared runs


@lru_cache(maxsize=None)
def _scenario(name: str):
    return load_scenario(canned_scenarios()[name])


@lru_cache(maxsize=None)
def _trajectory(name: str):
    return simulate(_scenario(name))


@lru_cache(maxsize=None)
def _threshold():
    return threshold_bisect(_scenario("threshold_unbalanced"))


def _analytic_loop(m: int = 4001) -> np.ndarray:
    th = np.linspace(0.0, math.pi, m)
    u = -np.cos(th)
    v = (1.0 - u * u) / math.sqrt(2.0)
    upper = np.column_stack([u, v])
    lower = np.column_stack([u[::-1], -v[::-1]])
    return np.vstack([upper, lower[1:]])


# ---------------------------------------------------------------------------
# criteria


def criterion_1() -> CriterionResult:
    def body():
        pi = component_Pi0(nl.cubic())
        exact = _analytic_loop()
        comp = pi.lambda_out.boundary
        haus = max(float(np.max(distance_to_polyline(exact, comp))),
                   float(np.max(distance_to_polyline(comp, exact))))
        ok = (pi.loop_kind == "heteroclinic" and abs(pi.p_hat + 1) <= 1e-6 and abs(pi.q_hat - 1) <= 1e-6
              and haus <= 1e-4)
        return ok, {"kind": pi.loop_kind, "p_hat_err": abs(pi.p_hat + 1), "q_hat_err": abs(pi.q_hat - 1),
                    "hausdorff": haus}
    return _timed(1, "heteroclinic outer loop of u - u^3", 1.0, body)


def _qhat_oracle(a: float) -> float:
    # F(q) - F(-a) has a double root at -a; the remaining quadratic holds q_hat
    F = P.polyint([0.0, a, 1.0 - a, -1.0])
    G = F.copy()
    G[0] -= P.polyval(-a, F)
    quot, rem = P.polydiv(G, P.polymul([a, 1.0], [a, 1.0]))
    r = [z.real for z in P.polyroots(quot) if abs(z.imag) < 1e-12 and 0 < z.real < 1]
    q = brentq(lambda s: P.polyval(s, F) - P.polyval(-a, F), 1e-9, 1.0 - 1e-9, xtol=1e-15)
    if not r or abs(r[0] - q) > 1e-12:
        raise RuntimeError("oracles disagree")
    return q


def criterion_2() -> CriterionResult:
    def body():
        pi = component_Pi0(nl.unbalanced_cubic(0.3))
        gamma = pi.outer_orbit.limit_equilibria[0]
        q = _qhat_oracle(0.3)
        ok = (pi.loop_kind == "homoclinic" and abs(gamma + 0.3) <= 1e-6 and abs(pi.p_hat + 0.3) <= 1e-6
              and abs(pi.q_hat - q) <= 1e-8)
        return ok, {"kind": pi.loop_kind, "gamma_err": abs(gamma + 0.3), "q_hat_err": abs(pi.q_hat - q)}
    return _timed(2, "homoclinic outer loop of u(1-u)(u+0.3)", 1.0, body)


def criterion_3() -> CriterionResult:
    def body():
        n = nl.cubic()
        T = minimal_period(n, periodic_orbit_at(n, -1e-3))
        rel = abs(T - 2 * math.pi) / (2 * math.pi)
        lin = nl.pure_linear()
        errs = [abs(minimal_period(lin, periodic_orbit_at(lin, -a)) - 2 * math.pi * math.sqrt(2)) for a in (0.1, 0.5, 2.0)]
        return rel <= 1e-2 and max(errs) <= 1e-6, {"cubic_rel_err": rel, "linear_max_err": max(errs)}
    return _timed(3, "small-amplitude and isochronous periods", 1.0, body)


def criterion_4() -> CriterionResult:
    def body():
        n = nl.cubic()
        pi = component_Pi0(n)
        xs = default_grid(10.0, 0.01)
        prof = profile_from_orbit(n, pi.outer_orbit, 0.0, xs)
        ed = float(np.max(np.abs(prof.phi - np.tanh(xs / math.sqrt(2)))))
        g = Grid.symmetric(50.0, 0.02)
        u0 = make_initial(g, {"kind": "profile", "params": {"values": np.tanh(g.x / math.sqrt(2)).tolist()}})
        tr = run(n, u0, SolverConfig.every(0.02, 50.0, 5.0))
        m = g.window_mask(20.0)
        drift = max(float(np.max(np.abs(s.u[m] - u0.values[m]))) for s in tr)
        return ed <= 1e-6 and drift <= 1e-4, {"profile_err": ed, "solver_drift": drift}
    return _timed(4, "standing wave tanh(x/sqrt 2)", 30.0, body)


def _report(name: str):
    return {c.name: c for c in evaluate(_scenario(name), _trajectory(name))}


def criterion_5() -> CriterionResult:
    def body():
        rep = _report("front_cubic")
        conv, shift = rep["convergent"], rep["front_shift"]
        return conv.passed and shift.passed, {"convergent": conv.details["convergent"],
                                              "shift": shift.details["shift"], "error": shift.details["error"]}
    return _timed(5, "front convergence to a shifted tanh", 60.0, body)


def criterion_6() -> CriterionResult:
    def body():
        rep = _report("nc_quasiconvergence")
        keys = ("critical_points_bounded", "zux_nonincreasing", "quasiconvergent")
        q = rep["quasiconvergent"].details
        ok = all(rep[k].passed for k in keys) and q["max_residual"] <= 1e-3 and q["tail_ut_sup"] <= 1e-4
        return ok, {"critical_points": rep["critical_points_bounded"].details["late_counts"],
                    "max_residual": q["max_residual"], "tail_ut_sup": q["tail_ut_sup"],
                    "quasiconvergent": q["quasiconvergent"]}
    return _timed(6, "quasiconvergence of a pinned bump", 120.0, body)


def criterion_7() -> CriterionResult:
    def body():
        b = _threshold()
        c = b.comparison
        width = b.bracket[1] - b.bracket[0]
        ok = (width <= 1e-4 and len(b.runs) <= 30 and c["distance_to_ground_state"] <= 1e-2
              and c["max_outside_distance"] <= 1e-2)
        return ok, {"threshold": b.threshold, "width": width, "runs": len(b.runs),
                    "ground_state_dist": c["distance_to_ground_state"],
                    "outside_dist": c["max_outside_distance"], "loop_dist": c["max_distance_to_loop"]}
    return _timed(7, "threshold bisection onto the ground state", 600.0, body)


def criterion_8() -> CriterionResult:
    def body():
        metrics, ok = {}, True
        runs = [("front_cubic", _trajectory("front_cubic")), ("nc_quasiconvergence", _trajectory("nc_quasiconvergence")),
                ("threshold_unbalanced", _threshold().midpoint_trajectory)]
        for name, tr in runs:
            ctx = _Context(_scenario(name), tr)
            w = None if name == "nc_quasiconvergence" else _scenario(name).window
            a, _ = _check_zux(ctx, 1, w)
            b, _ = _check_zshift(ctx, 1)
            metrics[name] = "ok" if a and b else f"zux={a} zshift={b}"
            ok &= a and b
        r, d = _check_reflection(_Context(_scenario("front_cubic"), _trajectory("front_cubic")), (-5.0, 0.0, 5.0))
        metrics["reflection"] = d["max_counts"]
        return ok and r, metrics
    return _timed(8, "zero-number audits", math.inf, body)


def criterion_9() -> CriterionResult:
    def body():
        n = nl.cubic()
        g = Grid.symmetric(50.0, 0.02)
        base = 1.2 * np.exp(-g.x ** 2 / 8)
        cfg = SolverConfig.every(0.02, 50.0, 0.5)
        lo = run(n, make_initial(g, {"kind": "profile", "params": {"values": base.tolist()}}), cfg)
        hi_vals = base + 0.1 * np.exp(-g.x ** 2 / 10)
        hi = run(n, make_initial(g, {"kind": "profile", "params": {"values": hi_vals.tolist()}}), cfg)
        worst = max(float(np.max(a.u - b.u)) for a, b in zip(lo, hi))
        return worst <= 1e-8, {"max_violation": worst}
    return _timed(9, "discrete comparison principle", 60.0, body)


def criterion_10() -> CriterionResult:
    def body():
        s = _scenario("front_cubic")
        sols = []
        for h in (0.04, 0.02, 0.01):
            g = Grid.symmetric(s.grid.x_max, h)
            tr = run(s.nonlinearity, make_initial(g, s.config["u0"]), SolverConfig(h, s.solver.T, (s.solver.T,)))
            m = g.window_mask(s.window)
            sols.append(tr[-1].u[m])
        e1 = float(np.max(np.abs(sols[0] - sols[1][::2])))
        e2 = float(np.max(np.abs(sols[1] - sols[2][::2])))
        return e1 / e2 >= 3.5, {"e_h": e1, "e_h/2": e2, "ratio": e1 / e2}
    return _timed(10, "second-order refinement", 300.0, body)


CRITERIA: dict[int, Callable[[], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}


def run_criterion(k: int) -> CriterionResult:
    return CRITERIA[k]()


def verify_all(numbers=None, workers: int = 1) -> list[CriterionResult]:
    """Run the selected criteria; results come back in criterion order."""
    numbers = sorted(CRITERIA) if numbers is None else sorted(numbers)
    if workers <= 1:
        return [run_criterion(k) for k in numbers]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(run_criterion, numbers))


def format_table(results: list[CriterionResult]) -> str:
    lines = [r.line() for r in results]
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} criteria passed")
    return "\n".join(lines)
