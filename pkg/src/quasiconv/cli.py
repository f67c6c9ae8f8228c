"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 numerical
failure (blow-up or quadrature breakdown).
"""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
from pathlib import Path

import numpy as np

from . import runner
from .asymptotics import (
    classify_tail,
    omega_estimate,
    quasiconvergence_verdict,
    spatial_trajectory,
    trajectory_in_component,
)
from .errors import ConfigError, NumericalFailure, QuasiconvError
from .nonlinearity import Nonlinearity
from .phase_portrait import component_Pi0, periodic_orbit_at
from .steady_states import default_grid, ground_state, profile_from_orbit, residual, standing_waves
from .sturm import critical_points, monotonicity_audit, shifted_zero_count, zero_count

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _emit(obj) -> None:
    print(json.dumps(runner._plain(obj), indent=2, sort_keys=True))


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if not isinstance(v, str) else v for v in r])


def _nonlinearity(args) -> Nonlinearity:
    if args.config:
        return runner.load_scenario(args.config).nonlinearity
    if args.coeffs:
        return Nonlinearity(tuple(args.coeffs), args.kappa, args.delta)
    params = {"a": args.a} if args.preset == "unbalanced_cubic" and args.a is not None else {}
    return runner.build_nonlinearity({"preset": args.preset, "params": params})


def _resolve_scenario(ref: str) -> runner.Scenario:
    p = Path(ref)
    if p.exists():
        return runner.load_scenario(p)
    canned = runner.canned_scenarios()
    if ref in canned:
        return runner.load_scenario(canned[ref])
    raise ConfigError(ref, f"no such scenario file or canned scenario (known: {', '.join(canned)})")


# ---------------------------------------------------------------------------
# subcommands


def cmd_phase(args) -> int:
    n = _nonlinearity(args)
    rep = n.roots
    doc = {
        "nonlinearity": n.to_dict(),
        "roots": [{"location": r.location, "derivative": r.derivative, "stability": r.stability} for r in rep.roots],
        "nd_satisfied": rep.nd_satisfied,
    }
    pi = component_Pi0(n)
    doc["pi0"] = {"bounded": pi.bounded, "loop_kind": pi.loop_kind, "p_hat": pi.p_hat, "q_hat": pi.q_hat,
                  "level": None if pi.lambda_out is None else pi.lambda_out.level}
    out = _out_dir(args)
    if out is not None:
        (out / "phase.json").write_text(json.dumps(runner._plain(doc), indent=2, sort_keys=True) + "\n")
        if pi.lambda_out is not None:
            _write_rows(out / "loop.csv", ["u", "v"], pi.lambda_out.boundary)
    _emit(doc)
    return EXIT_OK


def cmd_steady(args) -> int:
    n = _nonlinearity(args)
    xs = default_grid(args.L, args.h)
    if args.kind == "periodic":
        if args.p is None:
            raise ConfigError("--p", "a periodic profile needs its turning point --p")
        prof = profile_from_orbit(n, periodic_orbit_at(n, args.p), 0.0, xs)
    elif args.kind == "ground_state":
        prof = ground_state(n, component_Pi0(n), xs)
    else:
        prof = standing_waves(n, component_Pi0(n), xs)[0]
    meta = dict(prof.metadata(), residual=residual(n, xs, prof.phi))
    out = _out_dir(args)
    if out is not None:
        _write_rows(out / f"{prof.kind}.csv", ["x", "phi", "dphi"], prof.to_rows())
        (out / f"{prof.kind}.json").write_text(json.dumps(runner._plain(meta), indent=2, sort_keys=True) + "\n")
    _emit(meta)
    return EXIT_OK


def cmd_simulate(args) -> int:
    s = _resolve_scenario(args.config)
    out = _out_dir(args) or Path(s.name)
    traj = runner.simulate(s)
    runner.write_trajectory(traj, s, out)
    _emit({"name": s.name, "config_hash": s.config_hash, "snapshots": len(traj), "out": str(out)})
    return EXIT_OK


def cmd_sturm(args) -> int:
    traj, man = runner.read_trajectory(args.run)
    L = args.window if args.window is not None else man.get("window", 20.0)
    rows, zux, zu, zs = [], [], [], []
    for st in traj:
        a = critical_points(st, window=L)
        m = np.abs(st.x) <= L + 1e-12
        b = zero_count(st.x[m], st.u[m])
        c = shifted_zero_count(st, st.theta_plus, window=L)
        zux.append(a)
        zu.append(b)
        zs.append(c)
    audits = {}
    for key, reps in (("z_ux", zux), ("z_u", zu), ("z_u_minus_thetaplus", zs)):
        v = monotonicity_audit(reps, traj.times, skip=1) if len(reps) >= 2 else None
        audits[key] = None if v is None else {"nonincreasing": v.nonincreasing, "drop_times": list(v.drop_times)}
    for k, st in enumerate(traj):
        drop = "".join(n[0] if k and not r[k].degenerate and r[k].count < r[k - 1].count else ""
                       for n, r in (("x", zux), ("u", zu), ("s", zs)))
        rows.append([st.t, *(_count(r[k]) for r in (zux, zu, zs)), drop or "-"])
    out = _out_dir(args)
    if out is not None:
        _write_rows(out / "sturm.csv", ["t", "z_ux", "z_u", "z_u_minus_thetaplus", "drops"], rows)
        (out / "sturm.json").write_text(json.dumps(runner._plain(audits), indent=2, sort_keys=True) + "\n")
    _emit(audits)
    ok = all(a is None or a["nonincreasing"] for a in audits.values())
    return EXIT_OK if ok else EXIT_CHECK


def _count(r) -> str:
    return "inf" if r.degenerate else str(r.count)


def cmd_omega(args) -> int:
    traj, man = runner.read_trajectory(args.run)
    n = traj.nonlinearity
    L = args.window if args.window is not None else man.get("window", 20.0)
    est = omega_estimate(traj, L, args.burn_in, args.radius, n)
    v = quasiconvergence_verdict(est, args.res_tol, args.ut_tol)
    doc = {
        "quasiconvergent": v.quasiconvergent,
        "convergent": v.convergent,
        "residuals": [c.residual for c in est.clusters],
        "clusters": [{"representative_time": c.representative.t, "members": len(c.member_times),
                      "max_distance": c.max_distance} for c in est.clusters],
        "tail_class": classify_tail(traj).regime,
        "evidence": v.evidence,
    }
    try:
        pi = component_Pi0(n)
    except QuasiconvError:
        pi = None
    if pi is not None and pi.bounded:
        worst = max(trajectory_in_component(spatial_trajectory(st, L), pi, 1e-6).max_outside_distance for st in traj)
        doc["containment"] = {"max_outside_distance": worst}
    else:
        doc["containment"] = None
    out = _out_dir(args)
    if out is not None:
        st0 = est.clusters[0].representative
        m = np.abs(st0.x) <= L + 1e-12
        cols = [st0.x[m]] + [c.representative.u[m] for c in est.clusters]
        _write_rows(out / "clusters.csv", ["x"] + [f"cluster_{k}" for k in range(len(est.clusters))],
                    np.column_stack(cols))
        (out / "verdict.json").write_text(json.dumps(runner._plain(doc), indent=2, sort_keys=True) + "\n")
    _emit(doc)
    return EXIT_OK


def cmd_scenario_run(args) -> int:
    s = _resolve_scenario(args.file)
    if args.window is not None:
        cfg = dict(s.config, window=args.window)
        s = runner.scenario_from_dict(cfg)
    rep = runner.run_scenario(s, args.out, write_snapshots=args.snapshots)
    _emit(rep.to_dict())
    return rep.exit_code


def cmd_scenario_bisect(args) -> int:
    s = _resolve_scenario(args.file)
    res = runner.threshold_bisect(s, tol=args.tol, steps=args.max_runs)
    doc = res.to_dict()
    out = _out_dir(args)
    if out is not None:
        d = out / s.name
        d.mkdir(parents=True, exist_ok=True)
        (d / "bisect.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _emit(doc)
    return EXIT_OK


def cmd_scenario_list(args) -> int:
    for name in runner.canned_scenarios():
        print(name)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .portfolio import format_table, verify_all

    only = None if not args.only else [int(k) for k in args.only.split(",")]
    results = verify_all(only, args.workers)
    print(format_table(results))
    out = _out_dir(args)
    if out is not None:
        doc = [{"criterion": r.number, "title": r.title, "passed": r.passed, "metrics": r.metrics} for r in results]
        (out / "verify.json").write_text(json.dumps(runner._plain(doc), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


# ---------------------------------------------------------------------------
# parser


def _nl_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("nonlinearity")
    g.add_argument("--preset", choices=["cubic", "unbalanced_cubic", "pure_linear"], default="cubic")
    g.add_argument("--a", type=float, default=None, help="parameter of unbalanced_cubic")
    g.add_argument("--coeffs", type=float, nargs="+", help="core polynomial, ascending degree")
    g.add_argument("--kappa", type=float, default=2.0)
    g.add_argument("--delta", type=float, default=1.0)
    g.add_argument("--config", help="take the nonlinearity from a scenario file")


def _common(defaults: bool) -> argparse.ArgumentParser:
    # subcommand copies suppress their defaults so flags given before the subcommand survive
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", default=d(None), help="artifact directory")
    p.add_argument("--window", type=float, default=d(None), help="observation half-width L_obs")
    p.add_argument("--seedless", action="store_true", default=d(False),
                   help="fail if any random number generator state is consumed")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common(False)
    ap = argparse.ArgumentParser(prog="quasiconv", description="Quasiconvergence toolkit for u_t = u_xx + f(u).",
                                 parents=[_common(True)])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phase", parents=[common], help="zeros of f and the component around the origin")
    _nl_args(p)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("steady", parents=[common], help="sample a steady state on a grid")
    _nl_args(p)
    p.add_argument("--kind", choices=["ground_state", "standing_wave", "periodic"], default="standing_wave")
    p.add_argument("--p", type=float, default=None, help="turning point of a periodic orbit")
    p.add_argument("--L", type=float, default=40.0)
    p.add_argument("--h", type=float, default=0.01)
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("simulate", parents=[common], help="run the solver and write snapshots")
    p.add_argument("config", help="scenario file or canned scenario name")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sturm", parents=[common], help="zero-number time series of a written run")
    p.add_argument("run", help="run directory (or its manifest.json)")
    p.set_defaults(func=cmd_sturm)

    p = sub.add_parser("omega", parents=[common], help="omega-limit estimate of a written run")
    p.add_argument("run", help="run directory (or its manifest.json)")
    p.add_argument("--burn-in", type=float, default=None)
    p.add_argument("--radius", type=float, default=1e-2)
    p.add_argument("--res-tol", type=float, default=1e-3)
    p.add_argument("--ut-tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_omega)

    p = sub.add_parser("scenario", parents=[common], help="canned experiments")
    ss = p.add_subparsers(dest="action", required=True)
    q = ss.add_parser("run", parents=[common])
    q.add_argument("file", help="scenario file or canned scenario name")
    q.add_argument("--snapshots", action="store_true", help="also write every snapshot")
    q.set_defaults(func=cmd_scenario_run)
    q = ss.add_parser("bisect", parents=[common])
    q.add_argument("file")
    q.add_argument("--tol", type=float, default=None)
    q.add_argument("--max-runs", type=int, default=None)
    q.set_defaults(func=cmd_scenario_bisect)
    q = ss.add_parser("list", parents=[common])
    q.set_defaults(func=cmd_scenario_list)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance portfolio")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_verify)
    return ap


def _rng_state():
    return random.getstate(), np.random.get_state(legacy=False)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    before = _rng_state() if args.seedless else None
    try:
        code = args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except QuasiconvError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CHECK
    if before is not None:
        after = _rng_state()
        if before[0] != after[0] or repr(before[1]) != repr(after[1]):
            print("--seedless: random state was consumed", file=sys.stderr)
            return EXIT_CHECK
    return code


if __name__ == "__main__":
    sys.exit(main())
