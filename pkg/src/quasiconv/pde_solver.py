"""Integrator for ``u_t = u_xx + f(u)`` on a truncated line.

Time stepping is Strang splitting: a half step of the pointwise reaction
ODE (one RK4 substep), a full Crank-Nicolson diffusion step with Dirichlet
data, and another reaction half step. The end nodes carry the far-field
values ``theta(t)`` and only ever see the reaction substeps, so they follow
``theta' = f(theta)`` exactly as the spatial limits of the true solution do.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import BlowUp
from .nonlinearity import Nonlinearity

__all__ = [
    "Grid",
    "InitialDatum",
    "SolutionState",
    "SolverConfig",
    "Trajectory",
    "step",
    "run",
    "boundary_theta",
    "conserved_region_check",
    "make_initial",
    "derive_state",
]


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 3 or not self.x_max > self.x_min:
            raise ValueError("grid needs n >= 3 and x_max > x_min")

    @classmethod
    def symmetric(cls, L: float, h: float) -> "Grid":
        m = int(round(2 * L / h))
        return cls(-float(L), float(L), m + 1)

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @cached_property
    def x(self) -> np.ndarray:
        x = np.linspace(self.x_min, self.x_max, self.n)
        x.flags.writeable = False
        return x

    def window_mask(self, L_obs: float) -> np.ndarray:
        return np.abs(self.x) <= L_obs + 1e-12


@dataclass(frozen=True, eq=False)
class InitialDatum:
    grid: Grid
    values: np.ndarray
    limits: tuple[float, float]
    tol: float = 1e-8

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError("initial values do not match the grid")
        if abs(v[0] - self.limits[0]) > self.tol or abs(v[-1] - self.limits[1]) > self.tol:
            raise ValueError(
                f"boundary samples ({v[0]:.3g}, {v[-1]:.3g}) differ from the declared limits {self.limits}"
            )
        v = v.copy()
        # the end nodes carry the limits themselves
        v[0], v[-1] = self.limits
        object.__setattr__(self, "values", v)

    @property
    def limits_equal(self) -> bool:
        return self.limits[0] == self.limits[1]


@dataclass(frozen=True, eq=False)
class SolutionState:
    t: float
    grid: Grid
    u: np.ndarray
    ux: np.ndarray
    ut: np.ndarray

    @property
    def theta_minus(self) -> float:
        return float(self.u[0])

    @property
    def theta_plus(self) -> float:
        return float(self.u[-1])

    @property
    def x(self) -> np.ndarray:
        return self.grid.x


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    T: float
    snapshot_times: tuple[float, ...] = ()
    blowup_bound: float | None = None
    scheme: str = "strang-cn-rk4"
    pin_zero: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        times = tuple(float(t) for t in self.snapshot_times) or (0.0, float(self.T))
        if any(t < 0 or t > self.T + 1e-12 for t in times):
            raise ValueError("snapshot times must lie in [0, T]")
        if any(b <= a for a, b in zip(times[:-1], times[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        object.__setattr__(self, "snapshot_times", times)

    @classmethod
    def every(cls, dt: float, T: float, interval: float, **kw) -> "SolverConfig":
        k = int(round(T / interval))
        return cls(dt, T, tuple(i * interval for i in range(k + 1)), **kw)

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(eq=False)
class Trajectory:
    states: list[SolutionState]
    config_hash: str
    nonlinearity: Nonlinearity | None = None

    def __post_init__(self):
        ts = [s.t for s in self.states]
        if any(b <= a for a, b in zip(ts[:-1], ts[1:])):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def grid(self) -> Grid:
        return self.states[0].grid

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i):
        return self.states[i]


# ---------------------------------------------------------------------------
# derived fields


def _ux(u: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order first derivative; one-sided stencils at the two end pairs."""
    d = np.empty_like(u)
    d[2:-2] = (u[:-4] - 8 * u[1:-3] + 8 * u[3:-1] - u[4:]) / (12 * h)
    d[0] = (-25 * u[0] + 48 * u[1] - 36 * u[2] + 16 * u[3] - 3 * u[4]) / (12 * h)
    d[1] = (-3 * u[0] - 10 * u[1] + 18 * u[2] - 6 * u[3] + u[4]) / (12 * h)
    d[-1] = (25 * u[-1] - 48 * u[-2] + 36 * u[-3] - 16 * u[-4] + 3 * u[-5]) / (12 * h)
    d[-2] = (3 * u[-1] + 10 * u[-2] - 18 * u[-3] + 6 * u[-4] - u[-5]) / (12 * h)
    return d


def _ut(n: Nonlinearity, u: np.ndarray, h: float) -> np.ndarray:
    fu = n.f(u)
    out = fu.copy()
    out[1:-1] += (u[2:] - 2 * u[1:-1] + u[:-2]) / (h * h)
    return out


def derive_state(n: Nonlinearity, grid: Grid, t: float, u: np.ndarray) -> SolutionState:
    u = np.array(u, dtype=float)
    h = grid.h
    if grid.n < 5:
        ux = np.gradient(u, h)
    else:
        ux = _ux(u, h)
    return SolutionState(float(t), grid, u, ux, _ut(n, u, h))


# ---------------------------------------------------------------------------
# stepping


class _Stepper:
    def __init__(self, n: Nonlinearity, grid: Grid, dt: float, pin=(False, False)):
        self.n = n
        self.dt = dt
        self.r = dt / grid.h ** 2
        m = grid.n - 2
        ab = np.empty((2, m))
        ab[0, :] = -0.5 * self.r
        ab[1, :] = 1.0 + self.r
        self._chol = cholesky_banded(ab, lower=False)
        self.pin = pin

    def _react(self, u: np.ndarray, tau: float) -> np.ndarray:
        f = self.n.f
        k1 = f(u)
        k2 = f(u + 0.5 * tau * k1)
        k3 = f(u + 0.5 * tau * k2)
        k4 = f(u + tau * k3)
        out = u + (tau / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if self.pin[0]:
            out[0] = 0.0
        if self.pin[1]:
            out[-1] = 0.0
        return out

    def _diffuse(self, u: np.ndarray) -> np.ndarray:
        r = self.r
        rhs = u[1:-1] + 0.5 * r * (u[2:] - 2 * u[1:-1] + u[:-2])
        rhs[0] += 0.5 * r * u[0]
        rhs[-1] += 0.5 * r * u[-1]
        out = u.copy()
        out[1:-1] = cho_solve_banded((self._chol, False), rhs, check_finite=False)
        return out

    def __call__(self, u: np.ndarray) -> np.ndarray:
        half = 0.5 * self.dt
        return self._react(self._diffuse(self._react(u, half)), half)


def _pins(n: Nonlinearity, u: np.ndarray, enabled: bool) -> tuple[bool, bool]:
    if not enabled or n.f(0.0) != 0.0:
        return (False, False)
    return (u[0] == 0.0, u[-1] == 0.0)


def _default_bound(n: Nonlinearity) -> float:
    return 10.0 * n.outer


def step(n: Nonlinearity, state: SolutionState, dt: float, blowup_bound: float | None = None,
         pin_zero: bool = True) -> SolutionState:
    """Advance one Strang step of size ``dt``."""
    bound = _default_bound(n) if blowup_bound is None else blowup_bound
    if not np.all(np.isfinite(state.u)) or np.max(np.abs(state.u)) > bound:
        raise BlowUp(state.t, float(np.max(np.abs(state.u))))
    st = _Stepper(n, state.grid, dt, _pins(n, state.u, pin_zero))
    u = st(state.u)
    sup = float(np.max(np.abs(u)))
    if not math.isfinite(sup) or sup > bound:
        raise BlowUp(state.t + dt, sup)
    return derive_state(n, state.grid, state.t + dt, u)


def run(
    n: Nonlinearity,
    u0: InitialDatum,
    cfg: SolverConfig,
    stop: Callable[[SolutionState], bool] | None = None,
) -> Trajectory:
    """Integrate from ``u0`` and record the configured snapshots.

    ``stop`` is called on every recorded snapshot; returning True ends the
    run early (the trajectory then ends at that snapshot).
    """
    grid = u0.grid
    bound = _default_bound(n) if cfg.blowup_bound is None else cfg.blowup_bound
    u = u0.values.copy()
    pins = _pins(n, u, cfg.pin_zero)
    steppers: dict[float, _Stepper] = {}

    def stepper(dt):
        key = round(dt, 14)
        if key not in steppers:
            steppers[key] = _Stepper(n, grid, dt, pins)
        return steppers[key]

    t = 0.0
    states: list[SolutionState] = []
    for target in cfg.snapshot_times:
        eps = 1e-9 * max(1.0, target)
        while target - t > eps:
            dt = cfg.dt if target - t >= cfg.dt - eps else target - t
            u = stepper(dt)(u)
            t += dt
            sup = float(np.max(np.abs(u)))
            if not math.isfinite(sup) or sup > bound:
                raise BlowUp(t, sup)
        t = target
        state = derive_state(n, grid, target, u)
        states.append(state)
        if stop is not None and stop(state):
            break
    return Trajectory(states, cfg.config_hash(), n)


def boundary_theta(n: Nonlinearity, theta0: float, t: float, rtol: float = 1e-12) -> float:
    """Solution of ``xi' = f(xi)``, ``xi(0) = theta0`` at time ``t``."""
    if t == 0 or n.f(theta0) == 0.0:
        return float(theta0)
    sol = solve_ivp(lambda _, y: n.f(y), (0.0, float(t)), [float(theta0)], method="DOP853",
                    rtol=rtol, atol=1e-14)
    if not sol.success:
        raise RuntimeError(sol.message)
    return float(sol.y[0, -1])


def conserved_region_check(traj: Trajectory, lo: float, hi: float, n: Nonlinearity | None = None,
                           tol: float = 1e-8) -> bool:
    """True iff every snapshot stays in ``[lo, hi]`` (an invariant interval when f(lo) > 0 > f(hi))."""
    n = traj.nonlinearity if n is None else n
    if n is not None and not (n.f(lo) > 0 > n.f(hi)):
        raise ValueError(f"[{lo}, {hi}] is not an invariant interval: need f(lo) > 0 > f(hi)")
    u0 = traj.states[0].u
    if np.min(u0) < lo - tol or np.max(u0) > hi + tol:
        raise ValueError("initial datum is not contained in the interval")
    return all(np.min(s.u) >= lo - tol and np.max(s.u) <= hi + tol for s in traj.states)


# ---------------------------------------------------------------------------
# initial data


def _heaviside(x, eps):
    return 0.5 * (1.0 + np.tanh(x / eps))


def make_initial(grid: Grid, spec: dict, tol: float = 1e-8) -> InitialDatum:
    """Build an initial datum from a config dict ``{"kind": ..., "params": {...}}``.

    Kinds: ``zero``, ``constant``, ``gaussian`` (``background + A exp(-(x-c)^2/s)``),
    ``smoothed_step`` (tanh transition between two limits), ``g_def`` (the
    three-level datum beta / theta_hat / gamma, mollified by tanh of width
    ``eps``) and ``profile`` (explicit values).
    """
    kind = spec["kind"]
    p = dict(spec.get("params", {}))
    x = grid.x
    if kind == "zero":
        v = np.zeros_like(x)
        lims = (0.0, 0.0)
    elif kind == "constant":
        c = float(p["value"])
        v = np.full_like(x, c)
        lims = (c, c)
    elif kind == "gaussian":
        bg = float(p.get("background", 0.0))
        A = float(p["amplitude"])
        v = bg + A * np.exp(-((x - float(p.get("center", 0.0))) ** 2) / float(p.get("scale", 8.0)))
        lims = (bg, bg)
        v[0] = v[-1] = bg
    elif kind == "smoothed_step":
        lo, hi = float(p.get("left", -1.0)), float(p.get("right", 1.0))
        v = lo + (hi - lo) * _heaviside(x - float(p.get("center", 0.0)), float(p.get("width", 1.0)))
        lims = (lo, hi)
        v[0], v[-1] = lims
    elif kind == "g_def":
        beta, th, q, gamma = (float(p[k]) for k in ("beta", "theta_hat", "q", "gamma"))
        eps = float(p.get("eps", 0.25))
        v = beta + (th - beta) * _heaviside(x + q, eps) + (gamma - th) * _heaviside(x, eps)
        lims = (beta, gamma)
        v[0], v[-1] = lims
    elif kind == "profile":
        v = np.asarray(p["values"], dtype=float)
        lims = (float(v[0]), float(v[-1]))
    else:
        raise ValueError(f"unknown initial datum kind {kind!r}")
    return InitialDatum(grid, v, lims, tol)
