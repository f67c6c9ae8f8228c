"""x-parameterized steady states built from phase-plane orbits.

A branch of an orbit is traversed in x by inverting ``x(u) = int du / |v|``.
Each half of a branch gets its own change of variables: a cosine map at a
regular turning point (where ``|v| ~ sqrt``) and a logarithmic map at a
saddle (where the transit time diverges like ``log``). The tabulated
``(x, u, u_x, u_xx)`` data are interpolated by quintic Hermite pieces, and
tails closer than ``TAIL_CUT`` to a saddle follow the linearized
exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BPoly

from .errors import QuadratureFailure, WrongLoopKind
from .nonlinearity import Nonlinearity
from .phase_portrait import OrbitRecord, PiComponent, minimal_period, orbit_gap

__all__ = [
    "SteadyProfile",
    "profile_from_orbit",
    "residual",
    "ground_state",
    "standing_waves",
    "default_grid",
    "TAIL_CUT",
]

TAIL_CUT = 1e-6
CELLS = 480
_GLX, _GLW = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True, eq=False)
class SteadyProfile:
    kind: str
    xs: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    level: float
    anchor: float = 0.0
    period: float | None = None
    limits: tuple[float, float] | None = None

    def to_rows(self):
        return np.column_stack([self.xs, self.phi, self.dphi])

    def metadata(self) -> dict:
        return {
            "kind": self.kind,
            "level": self.level,
            "anchor": self.anchor,
            "period": self.period,
            "limits": None if self.limits is None else list(self.limits),
        }


def default_grid(L: float = 40.0, h: float = 0.01) -> np.ndarray:
    m = int(round(2 * L / h))
    return np.linspace(-L, L, m + 1)


# ---------------------------------------------------------------------------
# branch tables


def _half(n, orbit, e, kind, m, cells):
    """Table from the end ``e`` (t = 0) to the midpoint ``m`` (t = 1)."""
    span = m - e
    if kind == "turn":
        def umap(t):
            return e + span * (1.0 - np.cos(0.5 * math.pi * t)), span * 0.5 * math.pi * np.sin(0.5 * math.pi * t)
    elif kind == "saddle":
        d0 = min(TAIL_CUT / abs(span), 0.5)
        ld = -math.log(d0)

        def umap(t):
            u = e + span * d0 ** (1.0 - t)
            return u, (u - e) * ld
    else:
        def umap(t):
            return e + span * t, span * np.ones_like(t)

    edges = np.linspace(0.0, 1.0, cells + 1)
    lo, hi = edges[:-1], edges[1:]
    tq = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * _GLX
    uq, duq = umap(tq)
    g = orbit_gap(n, orbit, uq)
    if np.any(g <= 0):
        raise QuadratureFailure("level gap vanished inside a branch")
    ds = (np.abs(duq) / np.sqrt(2.0 * g)) @ _GLW * 0.5 * (hi - lo)
    s = np.concatenate([[0.0], np.cumsum(ds)])
    u, _ = umap(edges)
    if kind == "turn":
        u[0] = e
    w = np.sqrt(2.0 * np.maximum(orbit_gap(n, orbit, u), 0.0))
    if kind == "turn":
        w[0] = 0.0
    if not np.all(np.isfinite(s)):
        raise QuadratureFailure("non-finite transit time")
    return s, u, w


def _segment(n, orbit, a, kind_a, b, kind_b, cells=CELLS):
    """``(s, u, |v|)`` along the branch from ``a`` to ``b``; ``s = 0`` at the start."""
    mid = 0.5 * (a + b)
    sA, uA, wA = _half(n, orbit, a, kind_a, mid, cells)
    sB, uB, wB = _half(n, orbit, b, kind_b, mid, cells)
    s = np.concatenate([sA, sA[-1] + (sB[-1] - sB[::-1])[1:]])
    u = np.concatenate([uA, uB[::-1][1:]])
    w = np.concatenate([wA, wB[::-1][1:]])
    return s, u, w


class _Branch:
    """Quintic Hermite interpolant of ``u(s)`` along a tabulated branch."""

    def __init__(self, n, s, u, w, direction):
        self.s_end = float(s[-1])
        self.u_end = float(u[-1])
        derivs = np.column_stack([u, direction * w, -n.f(u)])
        self._poly = BPoly.from_derivatives(s, derivs)
        self._dpoly = self._poly.derivative()

    def __call__(self, s):
        s = np.clip(s, 0.0, self.s_end)
        return self._poly(s), self._dpoly(s)


def _tail(gamma, lam, s_cut, u_cut, y):
    d = (u_cut - gamma) * np.exp(-lam * (y - s_cut))
    return gamma + d, -lam * d


def profile_from_orbit(n: Nonlinearity, orbit: OrbitRecord, x0: float = 0.0, xs=None) -> SteadyProfile:
    """Sample the steady state whose spatial trajectory is ``orbit``.

    Anchors: periodic orbits put their maximum at ``x0``; homoclinic orbits
    put their turning point at ``x0``; heteroclinic orbits put the u-midpoint
    of their range at ``x0``.
    """
    xs = default_grid() if xs is None else np.asarray(xs, dtype=float)
    y = xs - x0
    a, b = orbit.u_range
    ka, kb = orbit.endpoint_kinds

    if orbit.kind == "periodic":
        s, u, w = _segment(n, orbit, b, "turn", a, "turn")
        br = _Branch(n, s, u, w, -1.0)
        half = br.s_end
        yy = np.mod(y, 2 * half)
        first = yy <= half
        phi1, dphi1 = br(np.where(first, yy, 2 * half - yy))
        phi, dphi = phi1, np.where(first, dphi1, -dphi1)
        rho = minimal_period(n, orbit)
        return SteadyProfile("periodic", xs, phi, dphi, orbit.level, x0, rho, None)

    if orbit.kind == "homoclinic":
        if ka == "saddle":
            gamma, turn = a, b
        else:
            gamma, turn = b, a
        lam = math.sqrt(-float(n.df(gamma)))
        s, u, w = _segment(n, orbit, turn, "turn", gamma, "saddle")
        br = _Branch(n, s, u, w, math.copysign(1.0, gamma - turn))
        ay = np.abs(y)
        core_phi, core_d = br(ay)
        tail_phi, tail_d = _tail(gamma, lam, br.s_end, br.u_end, ay)
        inside = ay <= br.s_end
        phi = np.where(inside, core_phi, tail_phi)
        d = np.where(inside, core_d, tail_d)
        dphi = np.sign(y) * d
        return SteadyProfile("ground_state", xs, phi, dphi, orbit.level, x0, None, (gamma, gamma))

    if orbit.kind == "heteroclinic":
        gm, gp = a, b
        mid = 0.5 * (a + b)
        out_phi = np.empty_like(xs)
        out_d = np.empty_like(xs)
        for gamma, side in ((gp, y >= 0), (gm, y < 0)):
            lam = math.sqrt(-float(n.df(gamma)))
            s, u, w = _segment(n, orbit, mid, "regular", gamma, "saddle")
            br = _Branch(n, s, u, w, math.copysign(1.0, gamma - mid))
            ay = np.abs(y[side])
            cp, cd = br(ay)
            tp, td = _tail(gamma, lam, br.s_end, br.u_end, ay)
            inside = ay <= br.s_end
            out_phi[side] = np.where(inside, cp, tp)
            # d/dx = d/ds on the right, -d/ds on the left
            out_d[side] = np.where(inside, cd, td) * (1.0 if gamma == gp else -1.0)
        return SteadyProfile("standing_wave", xs, out_phi, out_d, orbit.level, x0, None, (gm, gp))

    raise ValueError(f"cannot build a profile from a {orbit.kind} orbit")


def residual(n: Nonlinearity, xs, phi) -> float:
    """Max over interior nodes of ``|phi'' + f(phi)|`` (three-point differences)."""
    xs = np.asarray(xs, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if xs.size < 3 or xs.shape != phi.shape:
        raise ValueError("need at least 3 samples with matching shapes")
    h = np.diff(xs)
    if np.any(h <= 0):
        raise ValueError("xs must be strictly increasing")
    h1, h2 = h[:-1], h[1:]
    d2 = 2.0 * ((phi[2:] - phi[1:-1]) / h2 - (phi[1:-1] - phi[:-2]) / h1) / (h1 + h2)
    return float(np.max(np.abs(d2 + n.f(phi[1:-1]))))


def ground_state(n: Nonlinearity, pi0: PiComponent, xs=None) -> SteadyProfile:
    if pi0.outer_orbit is None or pi0.loop_kind != "homoclinic":
        raise WrongLoopKind(f"outer loop is {pi0.loop_kind}, not homoclinic")
    return profile_from_orbit(n, pi0.outer_orbit, 0.0, xs)


def standing_waves(n: Nonlinearity, pi0: PiComponent, xs=None) -> tuple[SteadyProfile, SteadyProfile]:
    """Increasing wave (midpoint crossing at 0) and its mirror image."""
    if pi0.outer_orbit is None or pi0.loop_kind != "heteroclinic":
        raise WrongLoopKind(f"outer loop is {pi0.loop_kind}, not heteroclinic")
    xs = default_grid() if xs is None else np.asarray(xs, dtype=float)
    plus = profile_from_orbit(n, pi0.outer_orbit, 0.0, xs)
    back = profile_from_orbit(n, pi0.outer_orbit, 0.0, -xs)
    minus = SteadyProfile("standing_wave", xs, back.phi, -back.dphi, plus.level, 0.0, None,
                          (plus.limits[1], plus.limits[0]))
    return plus, minus
