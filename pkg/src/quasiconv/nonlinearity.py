"""Reaction term f with its antiderivative F, zero set and far-field surgery.

The reaction term is a polynomial on a core interval ``[-kappa, kappa]``,
blended linearly over a width ``delta`` into the tail ``f(s) = s/2``. The
tail makes f globally Lipschitz and every level set of the steady-state
Hamiltonian bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq, minimize_scalar

from .errors import NondegeneracyViolation

__all__ = [
    "Nonlinearity",
    "Root",
    "RootReport",
    "apply_MF",
    "eval_f",
    "eval_F",
    "find_roots",
    "check_ND",
    "cubic",
    "unbalanced_cubic",
    "pure_linear",
    "ND_TOL",
]

ND_TOL = 1e-8

# Gauss-Legendre nodes on [-1, 1]; exact for the piecewise polynomials used here.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


@dataclass(frozen=True)
class Nonlinearity:
    """Piecewise reaction term: polynomial core, linear blend, ``s/2`` tail.

    Parameters
    ----------
    coeffs : sequence of float
        Core polynomial coefficients in ascending degree.
    kappa : float
        Half-width of the core interval.
    delta : float
        Width of the linear blend between the core and the tail.
    """

    coeffs: tuple[float, ...]
    kappa: float = 2.0
    delta: float = 1.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs:
            raise ValueError("coeffs must be non-empty")
        if not (self.kappa > 0 and self.delta > 0):
            raise ValueError("kappa and delta must be positive")
        if 2 * (len(self.coeffs) + 1) > 2 * len(_GL_X):
            raise ValueError("core degree too high for the built-in quadrature")

    # -- piece data -------------------------------------------------------

    @property
    def outer(self) -> float:
        """Start of the linear tail, ``kappa + delta``."""
        return self.kappa + self.delta

    @cached_property
    def _dcoeffs(self) -> np.ndarray:
        return P.polyder(np.asarray(self.coeffs))

    @cached_property
    def _icoeffs(self) -> np.ndarray:
        return P.polyint(np.asarray(self.coeffs), lbnd=0.0)

    @cached_property
    def _blend(self) -> tuple[float, float, float, float]:
        k, d, K = self.kappa, self.delta, self.outer
        aR = float(P.polyval(k, self.coeffs))
        aL = float(P.polyval(-k, self.coeffs))
        bR = (K / 2 - aR) / d
        bL = (-K / 2 - aL) / d  # slope in t = -kappa - s
        return aR, bR, aL, bL

    @cached_property
    def _F_knots(self) -> tuple[float, float, float, float]:
        k, d = self.kappa, self.delta
        aR, bR, aL, bL = self._blend
        Fk = float(P.polyval(k, self._icoeffs))
        Fmk = float(P.polyval(-k, self._icoeffs))
        FK = Fk + aR * d + bR * d * d / 2
        FmK = Fmk - aL * d - bL * d * d / 2
        return Fmk, Fk, FmK, FK

    # -- evaluation -------------------------------------------------------

    def f(self, u):
        u = np.asarray(u, dtype=float)
        k, K = self.kappa, self.outer
        aR, bR, aL, bL = self._blend
        out = P.polyval(u, self.coeffs)
        au = np.abs(u)
        if np.any(au > k):
            out = np.where(
                au <= k,
                out,
                np.where(
                    au >= K,
                    u / 2,
                    np.where(u > 0, aR + bR * (u - k), aL + bL * (-k - u)),
                ),
            )
        return out[()] if out.ndim == 0 else out

    def df(self, u):
        """Derivative of f; at the kinks ``|u| = kappa`` the core slope is used."""
        u = np.asarray(u, dtype=float)
        k, K = self.kappa, self.outer
        _, bR, _, bL = self._blend
        out = P.polyval(u, self._dcoeffs) if len(self._dcoeffs) else np.zeros_like(u)
        out = np.where(
            np.abs(u) <= k,
            out,
            np.where(np.abs(u) >= K, 0.5, np.where(u > 0, bR, -bL)),
        )
        return out[()] if out.ndim == 0 else out

    def F(self, u):
        u = np.asarray(u, dtype=float)
        k, K = self.kappa, self.outer
        aR, bR, aL, bL = self._blend
        Fmk, Fk, FmK, FK = self._F_knots
        out = P.polyval(u, self._icoeffs)
        if np.any(np.abs(u) > k):
            s = u - k
            t = -k - u
            right = np.where(u >= K, FK + (u * u - K * K) / 4, Fk + aR * s + bR * s * s / 2)
            left = np.where(u <= -K, FmK + (u * u - K * K) / 4, Fmk - aL * t - bL * t * t / 2)
            out = np.where(np.abs(u) <= k, out, np.where(u > 0, right, left))
        return out[()] if out.ndim == 0 else out

    def F_diff(self, a, b):
        """``F(b) - F(a)`` as an integral of f, accurate when ``b - a`` is small.

        Direct subtraction of F values loses all relative precision for nearby
        arguments; here each smooth piece is integrated by Gauss-Legendre,
        which is exact for the piecewise polynomial form.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        a, b = np.broadcast_arrays(a, b)
        k, K = self.kappa, self.outer
        knots = (-np.inf, -K, -k, k, K, np.inf)
        total = np.zeros(a.shape)
        for lo, hi in zip(knots[:-1], knots[1:]):
            aa = np.clip(a, lo, hi)
            bb = np.clip(b, lo, hi)
            half = (bb - aa) / 2
            if not np.any(half):
                continue
            mid = (aa + bb) / 2
            nodes = mid[..., None] + half[..., None] * _GL_X
            total = total + half * (self.f(nodes) @ _GL_W)
        return total[()] if total.ndim == 0 else total

    @cached_property
    def lipschitz_bound(self) -> float:
        k = self.kappa
        cands = [-k, k]
        d2 = P.polyder(np.asarray(self.coeffs), 2)
        if np.any(d2):
            # negligible leading terms would overflow the companion matrix
            scale = np.abs(d2) * max(k, 1.0) ** np.arange(len(d2))
            d2 = d2[: int(np.flatnonzero(scale > 1e-15 * np.max(scale))[-1]) + 1]
        if len(d2) > 1 and np.any(d2):
            for r in P.polyroots(d2):
                if abs(r.imag) < 1e-12 and -k <= r.real <= k:
                    cands.append(r.real)
        core = max(abs(float(P.polyval(c, self._dcoeffs))) for c in cands) if len(self._dcoeffs) else 0.0
        _, bR, _, bL = self._blend
        return max(core, abs(bR), abs(bL), 0.5)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {"coeffs": list(self.coeffs), "kappa": self.kappa, "delta": self.delta}

    @classmethod
    def from_dict(cls, d: dict) -> "Nonlinearity":
        return cls(tuple(d["coeffs"]), float(d.get("kappa", 2.0)), float(d.get("delta", 1.0)))

    @property
    def roots(self) -> "RootReport":
        """Zero set with the default tolerances (cached)."""
        if "roots" not in self._cache:
            self._cache["roots"] = find_roots(self, strict=False)
        return self._cache["roots"]


def apply_MF(core_coeffs: Sequence[float], kappa: float, delta: float = 1.0) -> Nonlinearity:
    """Attach the ``s/2`` far field to a polynomial core."""
    if not (kappa > 0 and delta > 0):
        raise ValueError("kappa and delta must be positive")
    return Nonlinearity(tuple(core_coeffs), kappa, delta)


def eval_f(n: Nonlinearity, u):
    return n.f(u)


def eval_F(n: Nonlinearity, u):
    return n.F(u)


@dataclass(frozen=True)
class Root:
    location: float
    derivative: float

    @property
    def stability(self) -> str:
        # stability for the ODE xi' = f(xi)
        if self.derivative < 0:
            return "stable"
        if self.derivative > 0:
            return "unstable"
        return "degenerate"


@dataclass(frozen=True)
class RootReport:
    roots: tuple[Root, ...]
    nd_satisfied: bool
    min_abs_derivative: float
    nd_tol: float = ND_TOL

    @property
    def locations(self) -> np.ndarray:
        return np.array([r.location for r in self.roots])

    def saddles(self) -> list[float]:
        """Zeros with f' < 0 (saddles of the planar steady-state system)."""
        return [r.location for r in self.roots if r.derivative < 0]

    def centers(self) -> list[float]:
        return [r.location for r in self.roots if r.derivative > 0]


def find_roots(
    n: Nonlinearity,
    tol: float = 1e-13,
    nd_tol: float = ND_TOL,
    strict: bool = True,
) -> RootReport:
    """Locate every zero of f on ``[-kappa-delta, kappa+delta]``.

    Sign changes on a dense scan are bracketed and refined by Brent's method
    plus one Newton step; local minima of |f| without a sign change are
    refined as well to catch tangential (degenerate) zeros.

    Raises
    ------
    NondegeneracyViolation
        If ``strict`` and some zero has ``|f'| <= nd_tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    K = n.outer
    m = int(math.ceil(2 * K / (1e-3 * 2 * K))) + 1
    xs = np.linspace(-K, K, m)
    fx = n.f(xs)
    found: list[float] = []
    found.extend(xs[fx == 0.0].tolist())
    sign = np.sign(fx)
    for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        r = brentq(n.f, xs[i], xs[i + 1], xtol=tol, rtol=4 * np.finfo(float).eps)
        d = float(n.df(r))
        if d != 0:
            r2 = r - float(n.f(r)) / d
            if xs[i] <= r2 <= xs[i + 1] and abs(n.f(r2)) <= abs(n.f(r)):
                r = r2
        found.append(float(r))
    # tangential zeros: local minima of |f| with no sign change around them
    af = np.abs(fx)
    scale = 1e-12 * (1.0 + n.lipschitz_bound)
    for i in range(1, m - 1):
        if af[i] <= af[i - 1] and af[i] <= af[i + 1] and sign[i - 1] == sign[i + 1] != 0 and af[i] > 0:
            res = minimize_scalar(lambda s: abs(float(n.f(s))), bounds=(xs[i - 1], xs[i + 1]),
                                  method="bounded", options={"xatol": 1e-12})
            if abs(n.f(res.x)) <= scale:
                found.append(float(res.x))
    found.sort()
    dedup: list[float] = []
    for r in found:
        if not dedup or r - dedup[-1] > 10 * tol + 1e-9:
            dedup.append(r)
    roots = tuple(Root(r, float(n.df(r))) for r in dedup)
    mind = min((abs(r.derivative) for r in roots), default=math.inf)
    report = RootReport(roots, mind > nd_tol, mind, nd_tol)
    if strict and not report.nd_satisfied:
        raise NondegeneracyViolation(f"min |f'| at zeros is {mind:.3g} <= {nd_tol:g}")
    return report


def check_ND(report: RootReport, tol: float = ND_TOL) -> bool:
    return all(abs(r.derivative) > tol for r in report.roots)


def cubic(kappa: float = 2.0, delta: float = 1.0) -> Nonlinearity:
    """Balanced bistable ``u - u^3``."""
    return Nonlinearity((0.0, 1.0, 0.0, -1.0), kappa, delta)


def unbalanced_cubic(a: float = 0.3, kappa: float = 2.0, delta: float = 1.0) -> Nonlinearity:
    """``u (1 - u) (u + a)``; zeros at ``-a`` (stable), 0 (unstable), 1 (stable)."""
    return Nonlinearity((0.0, a, 1.0 - a, -1.0), kappa, delta)


def pure_linear(kappa: float = 1.0, delta: float = 1.0) -> Nonlinearity:
    """``f(u) = u/2`` everywhere (the core already matches the tail)."""
    return Nonlinearity((0.0, 0.5), kappa, delta)
