"""Geometry of the planar steady-state system ``u' = v, v' = -f(u)``.

The system is Hamiltonian with ``H(u, v) = v**2/2 + F(u)``, so every orbit
lies on a level set and is determined by its turning points on the u-axis.
Periodic orbits, chains (the complement of the periodic-orbit region) and
the component of periodic orbits around the center ``(0, 0)`` are computed
from the zero set of f and one-dimensional root finding on F.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import (
    DegenerateEquilibrium,
    HitsEquilibrium,
    InsidePeriodicRegion,
    NoReturnPoint,
    NotACenter,
    QuadratureFailure,
)
from .nonlinearity import ND_TOL, Nonlinearity

__all__ = [
    "PhasePoint",
    "OrbitRecord",
    "Loop",
    "Chain",
    "PiComponent",
    "hamiltonian",
    "classify_equilibrium",
    "periodic_orbit_at",
    "minimal_period",
    "compute_chain_through",
    "component_Pi0",
    "interior_contains",
    "distance_to_loop",
    "distance_to_polyline",
    "orbit_gap",
    "level_tol",
]

LEVEL_RTOL = 1e-9
N_BRANCH = 400
_EPS = np.finfo(float).eps


def level_tol(c: float) -> float:
    """Tolerance for deciding ``F(p) == F(q)`` at level ``c``."""
    return LEVEL_RTOL * max(1.0, abs(c))


@dataclass(frozen=True)
class PhasePoint:
    u: float
    v: float

    def __iter__(self):
        yield self.u
        yield self.v


@dataclass(frozen=True, eq=False)
class OrbitRecord:
    """A single orbit, stored by its upper branch.

    ``endpoint_kinds`` tags each end of ``u_range`` as ``"turn"`` (a regular
    turning point, ``v ~ sqrt``), ``"saddle"`` (a limit equilibrium) or
    ``"point"`` for an equilibrium record.
    """

    kind: str
    level: float
    u_range: tuple[float, float]
    limit_equilibria: tuple[float, ...]
    polyline: np.ndarray
    endpoint_kinds: tuple[str, str] = ("turn", "turn")

    def closed_polyline(self) -> np.ndarray:
        return _close(self.polyline)


@dataclass(frozen=True, eq=False)
class Loop:
    kind: str
    level: float
    boundary: np.ndarray
    limit_equilibria: tuple[float, ...]
    u_range: tuple[float, float]


@dataclass(frozen=True, eq=False)
class Chain:
    level: float
    u_interval: tuple[float, float]
    members: list[OrbitRecord]
    loops: list[Loop] = field(default_factory=list)

    @property
    def trivial(self) -> bool:
        return self.u_interval[0] == self.u_interval[1]

    @property
    def equilibria(self) -> list[float]:
        return [m.u_range[0] for m in self.members if m.kind == "equilibrium"]


@dataclass(frozen=True, eq=False)
class PiComponent:
    center: float
    sigma_in: Chain
    lambda_out: Loop | None
    p_hat: float
    q_hat: float
    bounded: bool
    outer_orbit: OrbitRecord | None = None

    @property
    def loop_kind(self) -> str | None:
        return None if self.lambda_out is None else self.lambda_out.kind


def hamiltonian(n: Nonlinearity, p) -> float:
    u, v = p
    return 0.5 * np.asarray(v) ** 2 + n.F(u)


def classify_equilibrium(n: Nonlinearity, root: float, tol: float = ND_TOL) -> str:
    fr = abs(float(n.f(root)))
    if fr > 1e-8 * (1 + n.lipschitz_bound):
        raise ValueError(f"f({root}) = {fr:.3g} is not a zero")
    d = float(n.df(root))
    if abs(d) <= tol:
        raise DegenerateEquilibrium(f"f'({root}) = {d:.3g}")
    return "center" if d > 0 else "saddle"


# ---------------------------------------------------------------------------
# level-set helpers


def orbit_gap(n: Nonlinearity, orbit: OrbitRecord, u):
    """``level - F(u)`` measured from the nearest end of the orbit's u-range."""
    a, b = orbit.u_range
    u = np.asarray(u, dtype=float)
    mid = 0.5 * (a + b)
    g = np.where(u <= mid, -n.F_diff(a, u), n.F_diff(u, b))
    return g[()] if g.ndim == 0 else g


def _graded(a: float, b: float, m: int = N_BRANCH) -> np.ndarray:
    th = np.linspace(0.0, math.pi, m)
    u = 0.5 * (a + b) - 0.5 * (b - a) * np.cos(th)
    u[0], u[-1] = a, b
    return u


def _upper_branch(n: Nonlinearity, a: float, b: float, m: int = N_BRANCH) -> np.ndarray:
    u = _graded(a, b, m)
    mid = 0.5 * (a + b)
    g = np.where(u <= mid, -n.F_diff(a, u), n.F_diff(u, b))
    v = np.sqrt(2.0 * np.maximum(g, 0.0))
    v[0] = v[-1] = 0.0
    return np.column_stack([u, v])


def _close(upper: np.ndarray) -> np.ndarray:
    lower = upper[::-1].copy()
    lower[:, 1] *= -1
    return np.vstack([upper, lower[1:]])


def _far_right(n: Nonlinearity, c: float) -> float:
    K = n.outer
    FK = float(n.F(K))
    return max(K, math.sqrt(max(K * K + 4 * (c - FK), 0.0))) + 1.0


def _far_left(n: Nonlinearity, c: float) -> float:
    K = n.outer
    FK = float(n.F(-K))
    return -max(K, math.sqrt(max(K * K + 4 * (c - FK), 0.0))) - 1.0


def _crossing(n: Nonlinearity, ref: float, lo: float, hi: float) -> float:
    """Point in ``(lo, hi)`` where F returns to ``F(ref)``."""
    g = lambda u: float(n.F_diff(ref, u))
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0:
        # the bracketing end sits within rounding of the level
        return lo if abs(glo) < abs(ghi) else hi
    return brentq(g, lo, hi, xtol=1e-15, rtol=4 * _EPS, maxiter=200)


def _walk(n: Nonlinearity, a: float, direction: int) -> tuple[float, list[float]]:
    """Follow ``{F <= F(a)}`` from ``a`` in one direction.

    Returns the far endpoint where F first exceeds the level, and the
    equilibria touched on the way (local maxima of F at the level).
    """
    c = float(n.F(a))
    tol = level_tol(c)
    locs = [r.location for r in n.roots.roots]
    derivs = [r.derivative for r in n.roots.roots]
    if direction > 0:
        order = [(r, d) for r, d in zip(locs, derivs) if r > a + 1e-12]
    else:
        order = [(r, d) for r, d in zip(locs, derivs) if r < a - 1e-12][::-1]
    pos = a
    touches: list[float] = []
    for r, d in order:
        gap = float(n.F_diff(a, r))  # F(r) - c
        if d < 0:  # local maximum of F
            if abs(gap) <= tol:
                touches.append(r)
            elif gap > tol:
                return _crossing(n, a, pos, r), touches
        pos = r
    far = _far_right(n, c) if direction > 0 else _far_left(n, c)
    return _crossing(n, a, pos, far), touches


def _is_root(n: Nonlinearity, a: float) -> float | None:
    for r in n.roots.roots:
        if abs(r.location - a) <= 1e-10 * max(1.0, abs(a)):
            return r.location
    return None


# ---------------------------------------------------------------------------
# orbits


def periodic_orbit_at(n: Nonlinearity, p: float, m: int = N_BRANCH) -> OrbitRecord:
    """Periodic orbit through the left turning point ``(p, 0)``.

    Raises
    ------
    HitsEquilibrium
        If ``p`` is itself a zero of f or the level ``F(p)`` meets a saddle
        before F re-attains it (a chain level).
    NoReturnPoint
        If F does not decrease to the right of ``p``.
    """
    p = float(p)
    if _is_root(n, p) is not None:
        raise HitsEquilibrium(f"({p}, 0) is an equilibrium")
    if n.f(p) > 0:
        raise NoReturnPoint(f"F increases to the right of p={p}; not a left turning point")
    q, touches = _walk(n, p, +1)
    if touches:
        raise HitsEquilibrium(f"level F({p}) passes through the equilibrium ({touches[0]}, 0)")
    if not q > p:
        raise NoReturnPoint(f"no return point to the right of p={p}")
    c = float(n.F(p))
    return OrbitRecord("periodic", c, (p, q), (), _upper_branch(n, p, q, m), ("turn", "turn"))


def minimal_period(n: Nonlinearity, orbit: OrbitRecord, epsrel: float = 1e-11) -> float:
    """Twice the transit time between the turning points.

    With ``u = m - r cos(theta)`` the inverse-square-root singularities at
    both turning points cancel against ``du = r sin(theta) dtheta``.
    """
    if orbit.kind != "periodic":
        raise ValueError("minimal_period needs a periodic orbit")
    a, b = orbit.u_range
    mid, r = 0.5 * (a + b), 0.5 * (b - a)

    def integrand(th):
        u = mid - r * math.cos(th)
        g = float(-n.F_diff(a, u)) if th <= math.pi / 2 else float(n.F_diff(u, b))
        if g <= 0:
            return 0.0
        return r * math.sin(th) / math.sqrt(2.0 * g)

    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, err = quad(integrand, 0.0, math.pi, epsabs=0.0, epsrel=epsrel, limit=400,
                            points=[math.pi / 2])
        except IntegrationWarning as exc:
            raise QuadratureFailure(str(exc)) from exc
    if not math.isfinite(val):
        raise QuadratureFailure("non-finite period")
    return 2.0 * val


def _equilibrium_record(c: float, r: float) -> OrbitRecord:
    return OrbitRecord("equilibrium", c, (r, r), (r,), np.array([[r, 0.0]]), ("point", "point"))


def _arc(n: Nonlinearity, c: float, a: float, b: float, kind_a: str, kind_b: str, m: int) -> OrbitRecord:
    lims = tuple(x for x, k in ((a, kind_a), (b, kind_b)) if k == "saddle")
    kind = "heteroclinic" if len(lims) == 2 else "homoclinic"
    return OrbitRecord(kind, c, (a, b), lims, _upper_branch(n, a, b, m), (kind_a, kind_b))


def _loop_from(orbit: OrbitRecord) -> Loop:
    return Loop(orbit.kind, orbit.level, orbit.closed_polyline(), orbit.limit_equilibria, orbit.u_range)


def compute_chain_through(n: Nonlinearity, a: float, m: int = N_BRANCH) -> Chain:
    """The chain (component of the plane minus periodic orbits) through ``(a, 0)``.

    Raises
    ------
    InsidePeriodicRegion
        If ``(a, 0)`` lies on a nonstationary periodic orbit.
    """
    a = float(a)
    root = _is_root(n, a)
    if root is not None:
        a = root
    c = float(n.F(a))
    fa = 0.0 if root is not None else float(n.f(a))
    if fa > 0:
        p, touch_l = _walk(n, a, -1)
        q, touch_r = a, []
    elif fa < 0:
        p, touch_l = a, []
        q, touch_r = _walk(n, a, +1)
    else:
        p, touch_l = _walk(n, a, -1)
        q, touch_r = _walk(n, a, +1)
    eq = sorted(touch_l + ([a] if root is not None else []) + touch_r)
    if root is not None and float(n.df(a)) > 0:
        # a center: the chain is the point itself
        return Chain(c, (a, a), [_equilibrium_record(c, a)], [])
    if not eq:
        raise InsidePeriodicRegion(f"({a}, 0) lies on a periodic orbit at level {c:.6g}")
    members = [_equilibrium_record(c, e) for e in eq]
    loops: list[Loop] = []
    nodes = [(p, "turn")] + [(e, "saddle") for e in eq] + [(q, "turn")]
    for (x0, k0), (x1, k1) in zip(nodes[:-1], nodes[1:]):
        if x1 - x0 <= 1e-12 * max(1.0, abs(x0)):
            continue  # endpoint coincides with an equilibrium
        arc = _arc(n, c, x0, x1, k0, k1, m)
        members.append(arc)
        loops.append(_loop_from(arc))
    return Chain(c, (min(p, eq[0]), max(q, eq[-1])), members, loops)


def component_Pi0(n: Nonlinearity, m: int = N_BRANCH) -> PiComponent:
    """Component of periodic orbits around the center ``(0, 0)``.

    The outer loop is found at the lower of the two saddle levels flanking 0:
    equal levels give a heteroclinic loop, otherwise a homoclinic loop at the
    lower saddle whose other turning point solves ``F(q) = F(saddle)``.
    """
    if abs(n.f(0.0)) > 1e-12 or not n.df(0.0) > ND_TOL:
        raise NotACenter("(0, 0) is not a center: need f(0) = 0 < f'(0)")
    sigma_in = Chain(0.0, (0.0, 0.0), [_equilibrium_record(0.0, 0.0)], [])
    locs = n.roots.locations
    left = locs[locs < -1e-12]
    right = locs[locs > 1e-12]
    if left.size == 0 or right.size == 0:
        return PiComponent(0.0, sigma_in, None, -math.inf, math.inf, False)
    sL, sR = float(left.max()), float(right.min())
    if n.df(sL) >= 0 or n.df(sR) >= 0:
        raise DegenerateEquilibrium("zeros flanking the center are not saddles")
    gap = float(n.F_diff(sL, sR))  # F(sR) - F(sL)
    cL = float(n.F(sL))
    if abs(gap) <= level_tol(cL):
        orbit = _arc(n, cL, sL, sR, "saddle", "saddle", m)
        p_hat, q_hat = sL, sR
    elif gap > 0:
        q_hat = _crossing(n, sL, 0.0, sR)
        orbit = _arc(n, cL, sL, q_hat, "saddle", "turn", m)
        p_hat = sL
    else:
        cR = float(n.F(sR))
        p_hat = _crossing(n, sR, sL, 0.0)
        orbit = _arc(n, cR, p_hat, sR, "turn", "saddle", m)
        q_hat = sR
    return PiComponent(0.0, sigma_in, _loop_from(orbit), p_hat, q_hat, True, orbit)


# ---------------------------------------------------------------------------
# polyline geometry


def _segment_distances(a, d, dd, pts, idx):
    """Distances from ``pts[k]`` to the segments ``idx[k, :]``."""
    p = pts[:, None, :]
    t = np.clip(np.einsum("kij,kij->ki", p - a[idx], d[idx]) / dd[idx], 0.0, 1.0)
    proj = a[idx] + t[..., None] * d[idx]
    return np.sqrt(np.min(np.sum((p - proj) ** 2, axis=-1), axis=1))


def distance_to_polyline(poly: np.ndarray, pts) -> np.ndarray:
    """Exact Euclidean distance from each point to a polyline (segment-wise).

    Candidate segments are those adjacent to the k nearest vertices. A point
    more than ``r_k - l_max / 2`` from its best candidate (``r_k``: k-th
    vertex distance, ``l_max``: longest segment) is re-checked against every
    segment, so the result is exact either way.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 1:
        return np.hypot(*(pts - poly[0]).T)
    a = poly[:-1]
    d = poly[1:] - a
    dd = np.einsum("ij,ij->i", d, d)
    dd = np.where(dd == 0, 1.0, dd)
    nseg = len(a)
    k = min(8, len(poly))
    out = np.empty(len(pts))
    todo = np.arange(len(pts))
    if nseg > 32 and len(pts) > 8:
        r, vi = cKDTree(poly).query(pts, k=k)
        r, vi = np.atleast_2d(r.T).T, np.atleast_2d(vi.T).T
        cand = np.concatenate([np.clip(vi - 1, 0, nseg - 1), np.clip(vi, 0, nseg - 1)], axis=1)
        best = _segment_distances(a, d, dd, pts, cand)
        lmax = float(np.sqrt(np.max(dd)))
        sure = (best <= r[:, -1] - 0.5 * lmax) | (k == len(poly))
        out[sure] = best[sure]
        todo = np.flatnonzero(~sure)
    if todo.size:
        full = np.arange(nseg)
        chunk = max(1, 2_000_000 // nseg)
        for s in range(0, todo.size, chunk):
            sel = todo[s:s + chunk]
            out[sel] = _segment_distances(a, d, dd, pts[sel], np.broadcast_to(full, (sel.size, nseg)))
    return out


def distance_to_loop(loop: Loop, p) -> float:
    return float(distance_to_polyline(loop.boundary, [tuple(p)])[0])


def _even_odd(poly: np.ndarray, u: float, v: float) -> bool:
    x0, y0 = poly[:-1, 0], poly[:-1, 1]
    x1, y1 = poly[1:, 0], poly[1:, 1]
    straddle = (y0 > v) != (y1 > v)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x0 + (v - y0) * (x1 - x0) / (y1 - y0)
    return bool(np.count_nonzero(straddle & (xc > u)) % 2)


def interior_contains(loop: Loop, p, tol: float = 1e-9) -> str:
    """Even-odd ray test against the loop's Jordan polyline."""
    u, v = (float(x) for x in p)
    if distance_to_loop(loop, (u, v)) < tol:
        return "on_boundary"
    return "inside" if _even_odd(loop.boundary, u, v) else "outside"
