"""Phase-plane, steady-state, solver and limit-set tools for ``u_t = u_xx + f(u)`` on the line."""

from __future__ import annotations

from .errors import (
    BlowUp,
    ConfigError,
    NondegeneracyViolation,
    NumericalFailure,
    QuadratureFailure,
    QuasiconvError,
)
from .nonlinearity import Nonlinearity, apply_MF, check_ND, cubic, find_roots, pure_linear, unbalanced_cubic
from .pde_solver import Grid, InitialDatum, SolutionState, SolverConfig, Trajectory, make_initial, run, step
from .phase_portrait import compute_chain_through, component_Pi0, minimal_period, periodic_orbit_at
from .steady_states import ground_state, profile_from_orbit, residual, standing_waves

__version__ = "0.1.0"

__all__ = [
    "BlowUp",
    "ConfigError",
    "NondegeneracyViolation",
    "NumericalFailure",
    "QuadratureFailure",
    "QuasiconvError",
    "Nonlinearity",
    "apply_MF",
    "check_ND",
    "cubic",
    "find_roots",
    "pure_linear",
    "unbalanced_cubic",
    "Grid",
    "InitialDatum",
    "SolutionState",
    "SolverConfig",
    "Trajectory",
    "make_initial",
    "run",
    "step",
    "compute_chain_through",
    "component_Pi0",
    "minimal_period",
    "periodic_orbit_at",
    "ground_state",
    "profile_from_orbit",
    "residual",
    "standing_waves",
]
