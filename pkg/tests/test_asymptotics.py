from __future__ import annotations

import math

import numpy as np
import pytest

from quasiconv import nonlinearity as nl
from quasiconv.asymptotics import (
    TrajectoryCurve,
    check_entire_window,
    classify_tail,
    entire_window,
    extrema_sign_check,
    omega_estimate,
    quasiconvergence_verdict,
    shift_fit,
    simple_curve_check,
    spatial_trajectory,
    trajectory_in_component,
)
from quasiconv.errors import InsufficientData, OutOfRange
from quasiconv.pde_solver import Grid, SolverConfig, Trajectory, derive_state, make_initial, run
from quasiconv.phase_portrait import periodic_orbit_at
from quasiconv.steady_states import default_grid, profile_from_orbit, standing_waves

SQ2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def grid():
    return Grid.symmetric(30.0, 0.01)


def _state(n, g, u, t=0.0):
    return derive_state(n, g, t, u)


@pytest.fixture(scope="module")
def zero_traj(cubic):
    g = Grid.symmetric(30.0, 0.1)
    return run(cubic, make_initial(g, {"kind": "zero"}), SolverConfig.every(0.1, 10.0, 1.0))


# -- spatial trajectories ---------------------------------------------------------


def test_zero_curve_is_a_point(cubic, grid):
    c = spatial_trajectory(_state(cubic, grid, np.zeros(grid.n)))
    assert np.all(c.points == 0.0)
    assert simple_curve_check(c)


def test_tanh_curve_on_analytic_loop(cubic, grid):
    c = spatial_trajectory(_state(cubic, grid, np.tanh(grid.x / SQ2)))
    u, v = c.points.T
    assert np.max(np.abs(v - (1 - u * u) / SQ2)) <= 1e-6
    assert simple_curve_check(c)


def test_gaussian_curve_is_a_simple_arc(cubic, grid):
    c = spatial_trajectory(_state(cubic, grid, np.exp(-grid.x ** 2 / 8)))
    assert np.hypot(*c.points[0]) < 1e-10 and np.hypot(*c.points[-1]) < 1e-10
    assert simple_curve_check(c)


def test_trajectory_curve_validation():
    with pytest.raises(ValueError):
        TrajectoryCurve(np.zeros((3, 2)), 0.0)
    with pytest.raises(ValueError):
        TrajectoryCurve(np.full((10, 2), np.nan), 0.0)


def test_figure_eight_is_not_simple():
    s = np.linspace(0, 2 * math.pi, 400)
    assert not simple_curve_check(np.column_stack([np.sin(2 * s), np.sin(s)]))
    assert simple_curve_check(np.column_stack([np.cos(s[:-5]), np.sin(s[:-5])]))


def test_closed_loop_is_allowed_to_close():
    s = np.linspace(0, 2 * math.pi, 200)
    pts = np.column_stack([np.cos(s), np.sin(s)])
    pts[-1] = pts[0]
    assert simple_curve_check(pts)


def test_extrema_sign_check(cubic, grid):
    assert extrema_sign_check(_state(cubic, grid, np.exp(-grid.x ** 2 / 8)))
    assert not extrema_sign_check(_state(cubic, grid, 0.5 + 0.1 * np.cos(grid.x)))
    assert not extrema_sign_check(_state(cubic, grid, -0.5 + 0.1 * np.cos(grid.x)))
    assert extrema_sign_check(_state(cubic, grid, 0.1 * np.cos(grid.x)))


# -- omega-limit estimates ---------------------------------------------------------


def test_omega_zero_trajectory(zero_traj):
    est = omega_estimate(zero_traj)
    assert len(est.clusters) == 1
    assert np.all(est.clusters[0].representative.u == 0) and est.clusters[0].residual == 0.0
    v = quasiconvergence_verdict(est)
    assert v.convergent and v.quasiconvergent and v.evidence["cluster_count"] == 1


def test_omega_insufficient_data(cubic, zero_traj):
    with pytest.raises(InsufficientData):
        omega_estimate(zero_traj, burn_in=7.5)
    with pytest.raises(ValueError):
        omega_estimate(Trajectory(zero_traj.states, ""))


def test_two_profile_fixture_quasiconvergent_not_convergent(cubic):
    g = Grid.symmetric(30.0, 0.01)
    orbit = periodic_orbit_at(cubic, -0.6)
    a = profile_from_orbit(cubic, orbit, 0.0, g.x).phi
    b = profile_from_orbit(cubic, orbit, 2.0, g.x).phi
    states = []
    for k in range(40):
        w = min(1.0, max(0.0, (k - 18) / 4))  # a slow switch from a to b
        states.append(_state(cubic, g, (1 - w) * a + w * b, float(k)))
    est = omega_estimate(Trajectory(states, "", cubic), burn_in=0.0)
    v = quasiconvergence_verdict(est)
    assert len(est.clusters) >= 2
    assert v.quasiconvergent is False  # transition snapshots are not steady
    # dropping the transition leaves two steady clusters
    plateau = [s for s in states if s.t < 18 or s.t > 22]
    est = omega_estimate(Trajectory(plateau, "", cubic), burn_in=0.0)
    v = quasiconvergence_verdict(est)
    assert len(est.clusters) == 2 and v.quasiconvergent and not v.convergent
    for c in est.clusters:
        assert c.residual <= 1e-3 and c.max_distance == pytest.approx(0.0, abs=1e-12)


def test_clusters_attract_post_burn_in(cubic):
    g = Grid.symmetric(30.0, 0.1)
    tr = run(cubic, make_initial(g, {"kind": "gaussian", "params": {"amplitude": 0.5}}),
             SolverConfig.every(0.1, 30.0, 1.0))
    est = omega_estimate(tr)
    for c in est.clusters:
        assert c.max_distance <= est.radius
    assert sum(len(c.member_times) for c in est.clusters) == len([s for s in tr if s.t >= 15.0])


# -- containment ---------------------------------------------------------------------


def test_containment_point_curve(cubic, pi_cubic, grid):
    rep = trajectory_in_component(spatial_trajectory(_state(cubic, grid, np.zeros(grid.n))), pi_cubic)
    assert rep.inner_fraction == 1.0 and rep.inside_fraction == 0.0 and rep.max_outside_distance == 0.0


def test_containment_on_loop(cubic, pi_cubic):
    xs = default_grid(8.0, 0.01)
    plus, _ = standing_waves(cubic, pi_cubic, xs)
    c = TrajectoryCurve(np.column_stack([plus.phi, plus.dphi]), 0.0)
    rep = trajectory_in_component(c, pi_cubic, tol=1e-4)
    assert rep.max_outside_distance <= 1e-4
    assert rep.boundary_fraction == 1.0


def test_containment_small_periodic(cubic, pi_cubic, grid):
    prof = profile_from_orbit(cubic, periodic_orbit_at(cubic, -0.2), 0.0, grid.x)
    c = TrajectoryCurve(np.column_stack([prof.phi, prof.dphi]), 0.0)
    assert trajectory_in_component(c, pi_cubic).inside_fraction == 1.0


def test_containment_needs_bounded_component(cubic, grid):
    from quasiconv.phase_portrait import component_Pi0
    pi = component_Pi0(nl.pure_linear())
    with pytest.raises(ValueError):
        trajectory_in_component(spatial_trajectory(_state(cubic, grid, np.zeros(grid.n))), pi)


# -- tails and entire-solution windows --------------------------------------------------


@pytest.mark.parametrize("u0, regime", [
    ({"kind": "zero"}, "T2"),
    ({"kind": "constant", "params": {"value": -0.1}}, "T1"),
    ({"kind": "smoothed_step", "params": {"left": -0.1, "right": 0.0}}, "T3"),
])
def test_classify_tail(cubic, u0, regime):
    g = Grid.symmetric(20.0, 0.1)
    tr = run(cubic, make_initial(g, u0), SolverConfig.every(0.1, 20.0, 1.0))
    tc = classify_tail(tr)
    assert tc.regime == regime
    assert tc.theta_series.shape == (21, 3)
    if regime == "T1":
        assert tc.theta_series[-1, 1] == pytest.approx(-1.0, abs=1e-6)


def test_entire_window(zero_traj):
    states = entire_window(zero_traj, 5.0, 2.0)
    assert [s.t for s in states] == pytest.approx([-2, -1, 0, 1, 2])
    chk = check_entire_window(states)
    assert chk.all and chk.max_critical_points == 0 and chk.regime == "T2"
    with pytest.raises(OutOfRange):
        entire_window(zero_traj, 9.0, 2.0)


def test_shift_fit(cubic, pi_cubic):
    ref = standing_waves(cubic, pi_cubic, default_grid(40.0, 0.01))[0]
    xs = default_grid(25.0, 0.01)
    for mu in (-3.3, 0.0, 1.25):
        est, err = shift_fit(xs, np.tanh((xs - mu) / SQ2), ref)
        assert est == pytest.approx(mu, abs=1e-6) and err <= 1e-5
    with pytest.raises(ValueError):
        shift_fit(xs, np.tanh(xs), ref, span=30.0)
