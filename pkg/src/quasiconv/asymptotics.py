"""Late-time analysis of solver trajectories.

Limit sets are approximated on a fixed observation window ``[-L_obs, L_obs]``
in the sup norm: post-burn-in snapshots are clustered greedily, each cluster
is checked for being (close to) a steady state, and the far-field values
``theta_pm(t)`` decide the tail regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InsufficientData, OutOfRange
from .nonlinearity import Nonlinearity
from .pde_solver import SolutionState, Trajectory
from .phase_portrait import PiComponent, distance_to_polyline
from .steady_states import SteadyProfile, residual
from .sturm import critical_points, default_band

__all__ = [
    "L_OBS",
    "TrajectoryCurve",
    "Cluster",
    "OmegaEstimate",
    "QCVerdict",
    "Containment",
    "TailClass",
    "WindowChecks",
    "spatial_trajectory",
    "simple_curve_check",
    "extrema_sign_check",
    "omega_estimate",
    "quasiconvergence_verdict",
    "trajectory_in_component",
    "classify_tail",
    "entire_window",
    "check_entire_window",
    "shift_fit",
]

L_OBS = 20.0
RADIUS = 1e-2


def _window(state: SolutionState, window: float | None):
    x = state.x
    if window is None:
        return np.ones(x.shape, dtype=bool)
    return np.abs(x) <= window + 1e-12


# ---------------------------------------------------------------------------
# spatial trajectories


@dataclass(frozen=True, eq=False)
class TrajectoryCurve:
    points: np.ndarray  # (N, 2): columns u, u_x
    t: float

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 2 or len(self.points) < 8:
            raise ValueError("a trajectory curve needs at least 8 planar samples")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("trajectory curve has non-finite entries")

    def __len__(self):
        return len(self.points)


def spatial_trajectory(state: SolutionState, window: float | None = L_OBS) -> TrajectoryCurve:
    m = _window(state, window)
    return TrajectoryCurve(np.column_stack([state.u[m], state.ux[m]]), state.t)


def _dedupe(pts: np.ndarray, tol: float) -> np.ndarray:
    keep = [0]
    for i in range(1, len(pts)):
        if np.hypot(*(pts[i] - pts[keep[-1]])) > tol:
            keep.append(i)
    return pts[keep]


def _point_segment(p, a, b):
    d = b - a
    dd = np.einsum("...i,...i->...", d, d)
    t = np.clip(np.einsum("...i,...i->...", p - a, d) / np.where(dd == 0, 1.0, dd), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * d), axis=-1)


def simple_curve_check(curve: TrajectoryCurve | np.ndarray, tol: float = 1e-9) -> bool:
    """True iff no two non-adjacent polyline segments cross or touch.

    Consecutive samples closer than ``tol`` are merged first (flat stretches
    collapse to a point). The first and last segments may share an endpoint
    (a loop closing at its equilibrium) but may not cross.
    """
    pts = curve.points if isinstance(curve, TrajectoryCurve) else np.asarray(curve, dtype=float)
    pts = _dedupe(pts, tol)
    m = len(pts) - 1  # segments
    if m < 3:
        return True
    A, B = pts[:-1], pts[1:]

    def cross(o, a, b):
        return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0])

    chunk = max(1, 2_000_000 // m)
    for s in range(0, m - 2, chunk):
        i = np.arange(s, min(s + chunk, m - 2))
        a, b = A[i][:, None, :], B[i][:, None, :]
        c, d = A[None, :, :], B[None, :, :]
        valid = np.arange(m)[None, :] >= i[:, None] + 2
        o1, o2 = cross(a, b, c), cross(a, b, d)
        o3, o4 = cross(c, d, a), cross(c, d, b)
        proper = (o1 * o2 < 0) & (o3 * o4 < 0)
        touch = np.minimum.reduce([
            _point_segment(c, a, b), _point_segment(d, a, b),
            _point_segment(a, c, d), _point_segment(b, c, d),
        ]) <= tol
        closing = (i[:, None] == 0) & (np.arange(m)[None, :] == m - 1)
        bad = valid & (proper | (touch & ~closing))
        if np.any(bad):
            return False
    return True


def extrema_sign_check(state: SolutionState, band: float = 1e-8, window: float | None = L_OBS,
                       ux_band: float | None = None) -> bool:
    """No local minimum above ``band`` and no local maximum below ``-band`` on the window."""
    m = _window(state, window)
    u, ux = state.u[m], state.ux[m]
    ub = default_band(ux) if ux_band is None else ux_band
    sgn = np.where(ux > ub, 1, np.where(ux < -ub, -1, 0))
    nz = np.flatnonzero(sgn)
    for i, j in zip(nz[:-1], nz[1:]):
        if sgn[i] == sgn[j]:
            continue
        k = i + int(np.argmax(u[i:j + 1])) if sgn[i] > 0 else i + int(np.argmin(u[i:j + 1]))
        if sgn[i] > 0 and u[k] < -band:
            return False
        if sgn[i] < 0 and u[k] > band:
            return False
    return True


# ---------------------------------------------------------------------------
# omega-limit estimates


@dataclass(frozen=True, eq=False)
class Cluster:
    representative: SolutionState
    member_times: tuple[float, ...]
    max_distance: float
    residual: float


@dataclass(frozen=True, eq=False)
class OmegaEstimate:
    window: tuple[float, float]
    burn_in: float
    radius: float
    clusters: list[Cluster]
    ut_sup_series: np.ndarray  # (k, 2): t, sup |u_t| on the window

    @property
    def max_residual(self) -> float:
        return max(c.residual for c in self.clusters)


def omega_estimate(traj: Trajectory, window: float = L_OBS, burn_in: float | None = None,
                   radius: float = RADIUS, n: Nonlinearity | None = None) -> OmegaEstimate:
    """Greedy L-infinity clustering of post-burn-in window profiles.

    A snapshot joins the first cluster all of whose members lie within
    ``radius``; otherwise it opens a new cluster. Representatives are the
    latest members.
    """
    n = traj.nonlinearity if n is None else n
    if n is None:
        raise ValueError("a nonlinearity is needed for residuals")
    T = traj.states[-1].t
    burn_in = 0.5 * T if burn_in is None else float(burn_in)
    post = [s for s in traj.states if s.t >= burn_in - 1e-12]
    if len(post) < 5:
        raise InsufficientData(f"{len(post)} snapshots after burn-in {burn_in:g}; need 5")
    m = _window(post[0], window)
    profiles = [s.u[m] for s in post]
    groups: list[list[int]] = []
    for k, p in enumerate(profiles):
        for g in groups:
            if max(float(np.max(np.abs(p - profiles[j]))) for j in g) <= radius:
                g.append(k)
                break
        else:
            groups.append([k])
    xw = post[0].x[m]
    clusters = []
    for g in groups:
        dmax = max((float(np.max(np.abs(profiles[a] - profiles[b]))) for a in g for b in g if a < b),
                   default=0.0)
        rep = post[g[-1]]
        clusters.append(Cluster(rep, tuple(post[k].t for k in g), dmax, residual(n, xw, rep.u[m])))
    ut = np.array([(s.t, float(np.max(np.abs(s.ut[m])))) for s in post])
    return OmegaEstimate((-window, window), burn_in, radius, clusters, ut)


@dataclass(frozen=True)
class QCVerdict:
    quasiconvergent: bool
    convergent: bool
    evidence: dict = field(default_factory=dict)


def quasiconvergence_verdict(est: OmegaEstimate, res_tol: float = 1e-3, ut_tol: float = 1e-3,
                             tail_fraction: float = 0.25) -> QCVerdict:
    """Steady clusters plus a small late ``sup |u_t|``; one cluster means convergence.

    The tail of the ``u_t`` series is its last ``tail_fraction`` (at least one entry).
    """
    ut = est.ut_sup_series[:, 1]
    k = max(1, int(math.ceil(tail_fraction * len(ut))))
    tail_ut = float(np.max(ut[-k:]))
    max_res = est.max_residual
    qc = max_res <= res_tol and tail_ut <= ut_tol
    conv = qc and len(est.clusters) == 1
    return QCVerdict(qc, conv, {
        "max_residual": max_res,
        "final_ut_sup": float(ut[-1]),
        "tail_ut_sup": tail_ut,
        "cluster_count": len(est.clusters),
    })


# ---------------------------------------------------------------------------
# containment in the periodic region around the origin


@dataclass(frozen=True)
class Containment:
    inside_fraction: float
    boundary_fraction: float
    inner_fraction: float
    max_outside_distance: float
    samples: int


def _inside(poly: np.ndarray, pts: np.ndarray) -> np.ndarray:
    x0, y0 = poly[:-1, 0], poly[:-1, 1]
    x1, y1 = poly[1:, 0], poly[1:, 1]
    out = np.empty(len(pts), dtype=bool)
    chunk = max(1, 2_000_000 // len(x0))
    for s in range(0, len(pts), chunk):
        u = pts[s:s + chunk, 0:1]
        v = pts[s:s + chunk, 1:2]
        straddle = (y0 > v) != (y1 > v)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (v - y0) * (x1 - x0) / (y1 - y0)
        out[s:s + chunk] = np.count_nonzero(straddle & (xc > u), axis=1) % 2 == 1
    return out


def trajectory_in_component(curve: TrajectoryCurve, pi0: PiComponent, tol: float = 1e-6) -> Containment:
    """Where the samples of ``curve`` sit relative to the outer loop and inner chain.

    Samples within ``tol`` of the outer loop count as on the boundary, samples
    within ``tol`` of an equilibrium of the inner chain as on the inner chain;
    ``inside_fraction`` counts the rest that lie inside the loop.
    """
    if not pi0.bounded or pi0.lambda_out is None:
        raise ValueError("containment needs a bounded component")
    pts = curve.points
    d = distance_to_polyline(pi0.lambda_out.boundary, pts)
    on_b = d <= tol
    eq = np.array([[e, 0.0] for e in pi0.sigma_in.equilibria] or [[pi0.center, 0.0]])
    d_in = np.min(np.linalg.norm(pts[:, None, :] - eq[None], axis=-1), axis=1)
    on_in = (d_in <= tol) & ~on_b
    ins = _inside(pi0.lambda_out.boundary, pts)
    strictly = ins & ~on_b & ~on_in
    outside = ~ins & ~on_b
    N = len(pts)
    return Containment(
        float(np.count_nonzero(strictly)) / N,
        float(np.count_nonzero(on_b)) / N,
        float(np.count_nonzero(on_in)) / N,
        float(np.max(d[outside])) if np.any(outside) else 0.0,
        N,
    )


# ---------------------------------------------------------------------------
# tails and entire-solution windows


@dataclass(frozen=True, eq=False)
class TailClass:
    regime: str
    theta_series: np.ndarray  # (k, 3): t, theta_minus, theta_plus


def _side(vals: np.ndarray, band: float) -> str | None:
    if np.all(np.abs(vals) <= band):
        return "zero"
    if np.all(vals > band) or np.all(vals < -band):
        return "nonzero"
    return None


def classify_tail(traj: Trajectory, zero_band: float = 1e-8, late_window: float | None = None) -> TailClass:
    """Tail regime from the far-field values over ``[T - late_window, T]`` (default: last half)."""
    series = np.array([(s.t, s.theta_minus, s.theta_plus) for s in traj.states])
    T = series[-1, 0]
    t0 = series[0, 0] + 0.5 * (T - series[0, 0]) if late_window is None else T - late_window
    late = series[series[:, 0] >= t0 - 1e-12]
    a, b = _side(late[:, 1], zero_band), _side(late[:, 2], zero_band)
    if a is None or b is None:
        regime = "undetermined"
    elif a == b == "nonzero":
        regime = "T1"
    elif a == b == "zero":
        regime = "T2"
    else:
        regime = "T3"
    return TailClass(regime, series)


def entire_window(traj: Trajectory, t_center: float, half_width: float) -> list[SolutionState]:
    """Snapshots with ``|t - t_center| <= half_width``, re-timed so that ``t_center`` becomes 0."""
    t = traj.times
    lo, hi = t_center - half_width, t_center + half_width
    if lo < t[0] - 1e-9 or hi > t[-1] + 1e-9:
        raise OutOfRange(f"[{lo:g}, {hi:g}] is not inside the run [{t[0]:g}, {t[-1]:g}]")
    sel = [s for s in traj.states if lo - 1e-9 <= s.t <= hi + 1e-9]
    return [SolutionState(s.t - t_center, s.grid, s.u, s.ux, s.ut) for s in sel]


@dataclass(frozen=True)
class WindowChecks:
    ci: bool  # bounded critical-point counts
    cii: bool  # tails have a definite regime
    ciii: bool  # spatial trajectories are simple curves
    civ: bool  # no positive minima, no negative maxima
    max_critical_points: int
    regime: str

    @property
    def all(self) -> bool:
        return self.ci and self.cii and self.ciii and self.civ


def check_entire_window(states: list[SolutionState], window: float = L_OBS, band: float = 1e-8,
                        max_count: int = 100, zero_band: float = 1e-8) -> WindowChecks:
    """Conditions (ci)-(civ) on a window of an approximate entire solution.

    Flat snapshots (all of ``u_x`` inside the noise band) have no critical
    points to count and pass (ci) vacuously.
    """
    if not states:
        raise ValueError("empty window")
    counts = []
    for s in states:
        r = critical_points(s, window=window)
        counts.append(0 if r.degenerate else r.count)
    tail = classify_tail(Trajectory(list(states), ""), zero_band, late_window=math.inf)
    ciii = all(simple_curve_check(spatial_trajectory(s, window)) for s in states)
    civ = all(extrema_sign_check(s, band, window) for s in states)
    return WindowChecks(max(counts) <= max_count, tail.regime != "undetermined", ciii, civ,
                        int(max(counts)), tail.regime)


# ---------------------------------------------------------------------------
# shift fitting


def shift_fit(xs, u, ref: SteadyProfile, window: float = L_OBS, span: float = 10.0,
              step: float = 0.05) -> tuple[float, float]:
    """Shift ``mu`` minimizing ``max |u(x) - ref(x - mu)|`` over the window.

    A coarse scan over ``[-span, span]`` locates the basin, then a bounded
    scalar minimization refines it. Returns ``(mu, error)``.
    """
    xs = np.asarray(xs, dtype=float)
    u = np.asarray(u, dtype=float)
    m = np.abs(xs) <= window + 1e-12
    xw, uw = xs[m], u[m]
    if xw[0] - span < ref.xs[0] or xw[-1] + span > ref.xs[-1]:
        raise ValueError("reference profile does not cover the shifted window")

    def err(mu):
        return float(np.max(np.abs(uw - np.interp(xw - mu, ref.xs, ref.phi))))

    grid = np.arange(-span, span + 0.5 * step, step)
    k = int(np.argmin([err(mu) for mu in grid]))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(err, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    mu = float(res.x) if res.fun <= err(grid[k]) else float(grid[k])
    return mu, err(mu)
