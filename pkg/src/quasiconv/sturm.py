"""Zero counting on sampled profiles.

A zero is only ever counted through a sign change between samples that
clear a noise band ``|v| > band``; samples inside the band are neutral.
Dips into the band with no sign change are reported as suspected multiple
zeros, since multiplicity cannot be decided from samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import WindowTooSmall
from .pde_solver import SolutionState

__all__ = [
    "ZeroReport",
    "AuditVerdict",
    "zero_count",
    "default_band",
    "critical_points",
    "monotonicity_audit",
    "reflection_zero_count",
    "shifted_zero_count",
    "BAND_REL",
    "NOISE_FLOOR",
    "ENDPOINT_FLOOR",
]

BAND_REL = 1e-6
NOISE_FLOOR = 1e-10
ENDPOINT_FLOOR = 1e-13


@dataclass(frozen=True)
class ZeroReport:
    count: int
    locations: tuple[float, ...]
    suspected_multiple: tuple[float, ...]
    interval: tuple[float, float]
    degenerate: bool = False
    endpoints_nonzero: bool = True

    @property
    def value(self) -> float:
        """The count, or infinity when the sampled function vanishes identically."""
        return math.inf if self.degenerate else float(self.count)


def default_band(v, band_rel: float = BAND_REL, floor: float = NOISE_FLOOR) -> float:
    v = np.asarray(v)
    sup = float(np.max(np.abs(v))) if v.size else 0.0
    return max(band_rel * sup, floor)


def zero_count(xs, v, interval=None, band: float | None = None,
               endpoint_floor: float = ENDPOINT_FLOOR) -> ZeroReport:
    """Count sign changes of ``v`` on ``interval`` (closed; default: all of ``xs``)."""
    xs = np.asarray(xs, dtype=float)
    v = np.asarray(v, dtype=float)
    a, b = (xs[0], xs[-1]) if interval is None else (float(interval[0]), float(interval[1]))
    mask = (xs >= a) & (xs <= b)
    x, w = xs[mask], v[mask]
    if band is None:
        band = default_band(w)
    if x.size == 0:
        return ZeroReport(0, (), (), (a, b), True, False)
    sgn = np.where(w > band, 1, np.where(w < -band, -1, 0))
    nz = np.flatnonzero(sgn)
    ends_ok = bool(abs(w[0]) > endpoint_floor and abs(w[-1]) > endpoint_floor)
    if nz.size == 0:
        return ZeroReport(0, (), (float(x[0]), float(x[-1])), (a, b), True, ends_ok)
    locs: list[float] = []
    multi: list[float] = []
    for i, j in zip(nz[:-1], nz[1:]):
        if sgn[i] != sgn[j]:
            locs.append(_locate(x, w, i, j))
        elif j > i + 1:
            # neutral run between same-sign samples
            k = i + 1 + int(np.argmin(np.abs(w[i + 1:j])))
            multi.append(float(x[k]))
    return ZeroReport(len(locs), tuple(locs), tuple(multi), (a, b), False, ends_ok)


def _locate(x, w, i, j) -> float:
    """Zero between the significant samples ``i < j``; inside a neutral run, at its smallest |w|."""
    if j > i + 1:
        k = i + 1 + int(np.argmin(np.abs(w[i + 1:j])))
        if w[k] == 0.0:
            return float(x[k])
        # bracket with whichever neighbour has the opposite sign
        i, j = (k, k + 1) if np.sign(w[k + 1]) != np.sign(w[k]) else (k - 1, k)
        if np.sign(w[i]) == np.sign(w[j]):
            return float(x[k])
    w0, w1 = w[i], w[j]
    return float(x[i] - w0 * (x[j] - x[i]) / (w1 - w0))


def critical_points(state: SolutionState, band: float | None = None, window: float | None = None,
                    endpoint_floor: float = ENDPOINT_FLOOR) -> ZeroReport:
    """Zero count of ``u_x`` on the observation window ``[-window, window]``."""
    x = state.x
    interval = (x[1], x[-2]) if window is None else (-window, window)
    if band is None:
        m = (x >= interval[0]) & (x <= interval[1])
        band = default_band(state.ux[m])
    return zero_count(x, state.ux, interval, band, endpoint_floor)


def shifted_zero_count(state: SolutionState, level: float, band: float | None = None,
                       window: float | None = None) -> ZeroReport:
    """Zero count of ``u - level`` (e.g. ``level = theta_plus(t)``)."""
    x = state.x
    interval = (x[1], x[-2]) if window is None else (-window, window)
    v = state.u - level
    if band is None:
        m = (x >= interval[0]) & (x <= interval[1])
        band = default_band(v[m])
    return zero_count(x, v, interval, band)


def reflection_zero_count(state: SolutionState, lam: float, band: float | None = None,
                          window: float | None = None) -> ZeroReport:
    """Zero count of ``u(2*lam - x) - u(x)`` on the largest window symmetric about ``lam``."""
    x = state.x
    lo, hi = (x[0], x[-1]) if window is None else (-window, window)
    lo, hi = max(lo, x[0]), min(hi, x[-1])
    r = min(lam - lo, hi - lam)
    sel = (x >= lam - r) & (x <= lam + r)
    if r <= 0 or np.count_nonzero(sel) < 8:
        raise WindowTooSmall(f"symmetric window about {lam} has fewer than 8 nodes")
    xw = x[sel]
    refl = np.interp(2 * lam - xw, x, state.u)
    vv = refl - state.u[sel]
    if band is None:
        band = max(BAND_REL * float(np.max(np.abs(vv))), NOISE_FLOOR)
    rep = zero_count(xw, vv, (lam - r, lam + r), band)
    return rep


@dataclass(frozen=True)
class AuditVerdict:
    nonincreasing: bool
    drop_times: tuple[float, ...]
    counts: tuple[int, ...]
    excluded_times: tuple[float, ...] = ()
    violations: tuple[float, ...] = ()


def monotonicity_audit(reports: Sequence[ZeroReport], times: Sequence[float] | None = None,
                       skip: int = 0) -> AuditVerdict:
    """Check that counts never increase along a time-ordered series.

    Reports whose field touches the band at a window endpoint, or which are
    degenerate, are excluded: the count may legitimately change there by a
    zero crossing the endpoint. ``skip`` drops leading snapshots (transients).
    """
    if len(reports) < 2:
        raise ValueError("need at least two reports")
    times = list(range(len(reports))) if times is None else list(times)
    kept, excluded = [], []
    for t, r in list(zip(times, reports))[skip:]:
        if r.degenerate or not r.endpoints_nonzero:
            excluded.append(float(t))
        else:
            kept.append((float(t), r.count))
    drops, bad = [], []
    for (t0, c0), (t1, c1) in zip(kept[:-1], kept[1:]):
        if c1 < c0:
            drops.append(t1)
        elif c1 > c0:
            bad.append(t1)
    return AuditVerdict(not bad, tuple(drops), tuple(c for _, c in kept), tuple(excluded), tuple(bad))
