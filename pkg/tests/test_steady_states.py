from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasiconv import nonlinearity as nl
from quasiconv.errors import WrongLoopKind
from quasiconv.phase_portrait import minimal_period, periodic_orbit_at
from quasiconv.sturm import zero_count
from quasiconv.steady_states import (
    default_grid,
    ground_state,
    profile_from_orbit,
    residual,
    standing_waves,
)

SQ2 = math.sqrt(2.0)


def _richardson_residual(n, h, phi):
    """Steady residual with the second derivative extrapolated from steps 2h and h."""
    d2_h = (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / h**2
    d2_2h = (phi[4:] - 2 * phi[2:-2] + phi[:-4]) / (2 * h) ** 2
    d2 = (4 * d2_h[1:-1] - d2_2h) / 3
    return float(np.max(np.abs(d2 + n.f(phi[2:-2]))))


def test_heteroclinic_profile_is_tanh(cubic, pi_cubic):
    xs = default_grid(10.0, 0.01)
    prof = profile_from_orbit(cubic, pi_cubic.outer_orbit, 0.0, xs)
    assert np.max(np.abs(prof.phi - np.tanh(xs / SQ2))) <= 1e-6
    i0 = int(np.argmin(np.abs(xs)))
    assert prof.phi[i0] == pytest.approx(0.0, abs=1e-12)
    assert prof.dphi[i0] == pytest.approx(1 / SQ2, abs=1e-10)
    assert prof.limits == (-1.0, 1.0)


def test_heteroclinic_profile_steady_to_1e8(cubic, pi_cubic):
    # the plain three-point residual is capped by its own O(h^2) error, so the
    # 1e-8 bound is checked with a fourth-order extrapolated second derivative
    h = 0.01
    xs = default_grid(10.0, h)
    prof = profile_from_orbit(cubic, pi_cubic.outer_orbit, 0.0, xs)
    assert _richardson_residual(cubic, h, prof.phi) <= 1e-8


def test_residual_examples(cubic):
    xs = default_grid(10.0, 0.01)
    assert residual(cubic, xs, np.tanh(xs / SQ2)) <= 1e-3
    assert residual(cubic, xs, np.zeros_like(xs)) == 0.0
    assert residual(cubic, xs, np.full_like(xs, 0.5)) == pytest.approx(0.375, abs=1e-12)


def test_residual_nonuniform_grid_exact_for_quadratics():
    n = nl.Nonlinearity((0.0,))  # f = 0 so the residual is |phi''|
    xs = np.sort(np.random.default_rng(3).uniform(-0.5, 0.5, 40))  # stay below the far-field blend
    assert residual(n, xs, 1.5 * xs**2 + xs) == pytest.approx(3.0, abs=1e-8)


def test_residual_rejects_bad_input(cubic):
    with pytest.raises(ValueError):
        residual(cubic, [0.0, 1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        residual(cubic, [0.0, 2.0, 1.0], [0.0, 0.0, 0.0])


@pytest.mark.parametrize("p", [-0.8, -0.4, -0.05])
def test_periodic_profile_periodicity(cubic, p):
    orbit = periodic_orbit_at(cubic, p)
    rho = minimal_period(cubic, orbit)
    xs = np.linspace(-15, 15, 3001)
    a = profile_from_orbit(cubic, orbit, 0.0, xs)
    b = profile_from_orbit(cubic, orbit, 0.0, xs + rho)
    assert np.max(np.abs(a.phi - b.phi)) <= 1e-6
    assert a.period == pytest.approx(rho)
    assert a.phi[1500] == pytest.approx(orbit.u_range[1], abs=1e-12)
    assert residual(cubic, xs, a.phi) <= 1e-5 * 10  # FD floor for h = 0.01 and |phi''| below 1


def test_ground_state_unbalanced(unbalanced, pi_unbalanced):
    xs = default_grid(40.0, 0.01)
    gs = ground_state(unbalanced, pi_unbalanced, xs)
    assert gs.kind == "ground_state" and gs.limits == (-0.3, -0.3)
    assert np.max(np.abs(gs.phi - gs.phi[::-1])) <= 1e-12
    assert np.max(gs.phi) == pytest.approx(pi_unbalanced.q_hat, abs=1e-12)
    assert gs.phi[len(xs) // 2] == pytest.approx(pi_unbalanced.q_hat, abs=1e-12)
    # decay rate sqrt(0.39) leaves about 1e-5 at |x| = 20; 1e-6 is reached by |x| = 25
    far = np.abs(xs) >= 25
    assert np.max(np.abs(gs.phi[far] + 0.3)) <= 1e-6
    assert residual(unbalanced, xs, gs.phi) <= 1e-5


def test_ground_state_exponential_tail(unbalanced, pi_unbalanced):
    xs = default_grid(40.0, 0.01)
    gs = ground_state(unbalanced, pi_unbalanced, xs)
    lam = math.sqrt(-float(unbalanced.df(-0.3)))
    d = gs.phi + 0.3
    i, j = np.searchsorted(xs, [15.0, 20.0])
    rate = math.log(d[i] / d[j]) / (xs[j] - xs[i])
    assert rate == pytest.approx(lam, rel=1e-3)


def test_wrong_loop_kind(cubic, pi_cubic, unbalanced, pi_unbalanced):
    with pytest.raises(WrongLoopKind):
        ground_state(cubic, pi_cubic)
    with pytest.raises(WrongLoopKind):
        standing_waves(unbalanced, pi_unbalanced)


def test_standing_waves(cubic, pi_cubic):
    xs = np.arange(-1000, 1001) * 0.01  # exactly mirror-symmetric nodes
    plus, minus = standing_waves(cubic, pi_cubic, xs)
    assert np.max(np.abs(plus.phi - np.tanh(xs / SQ2))) <= 1e-6
    assert np.max(np.abs(minus.phi - np.tanh(-xs / SQ2))) <= 1e-6
    assert np.array_equal(minus.phi, plus.phi[::-1])
    assert np.all(plus.dphi > 0) and np.all(minus.dphi < 0)
    assert plus.limits == (-1.0, 1.0) and minus.limits == (1.0, -1.0)


@pytest.mark.parametrize("which", ["wave", "ground", "periodic"])
def test_hamiltonian_constant_along_profile(which, cubic, pi_cubic, unbalanced, pi_unbalanced):
    xs = default_grid(20.0, 0.01)
    if which == "wave":
        n, prof = cubic, standing_waves(cubic, pi_cubic, xs)[0]
    elif which == "ground":
        n, prof = unbalanced, ground_state(unbalanced, pi_unbalanced, xs)
    else:
        n, prof = cubic, profile_from_orbit(cubic, periodic_orbit_at(cubic, -0.6), 0.0, xs)
    H = 0.5 * prof.dphi**2 + n.F(prof.phi)
    assert np.max(np.abs(H - prof.level)) <= 1e-8


@given(st.floats(-3.0, 3.0))
@settings(max_examples=20, deadline=None)
def test_shift_covariance(cubic, s):
    orbit = periodic_orbit_at(cubic, -0.7)
    xs = np.linspace(-10, 10, 801)
    a = profile_from_orbit(cubic, orbit, 0.0, xs)
    b = profile_from_orbit(cubic, orbit, s, xs + s)
    assert np.max(np.abs(a.phi - b.phi)) <= 1e-9


def test_differences_of_steady_states_have_simple_zeros(cubic, pi_cubic):
    xs = default_grid(20.0, 0.01)
    profs = [profile_from_orbit(cubic, periodic_orbit_at(cubic, p), 0.0, xs) for p in (-0.3, -0.6, -0.9)]
    profs.append(standing_waves(cubic, pi_cubic, xs)[0])
    profs.append(profile_from_orbit(cubic, periodic_orbit_at(cubic, -0.6), 1.3, xs))
    for i in range(len(profs)):
        for j in range(i + 1, len(profs)):
            rep = zero_count(xs, profs[i].phi - profs[j].phi)
            assert not rep.degenerate
            assert rep.suspected_multiple == ()
            assert rep.count > 0
