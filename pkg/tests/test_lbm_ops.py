"""Unit tests of the lattice-engine operators: relaxation maps, the
Spalding simplex projection, the kinetic samplers (mass-exchange source,
stress, volume-fraction gradient), forces, streaming and boundary rules."""

from dataclasses import replace

import numpy as np
import pytest

from tubeflow.config import preset
from tubeflow.lattice import CS2, equilibrium_standard, moments
from tubeflow.lbm import (SolverAbort, alpha_relaxation, anti_bounce_back_in,
                          bgk_collide, bounce_back_in, compute_phi,
                          gradient_over_alpha, init_state, inlet_ramp,
                          lks_source, phase_forces, project_alpha_state,
                          relaxation_from_viscosity, spalding_bound,
                          stream_1d, stress_1d, symmetrize_gradients)


# ------------------------------------------------------------ relaxation maps

def test_relaxation_smooth_strategy():
    omega, psi = relaxation_from_viscosity(7.0 / 6.0, "d1_smooth")
    assert abs(omega - 0.6) <= 1e-16
    assert psi == 0.0
    omega, _ = relaxation_from_viscosity(1.0 / 6.0, "d1_smooth")
    assert abs(omega - 1.5) <= 1e-15


def test_relaxation_consistent_strategy():
    omega, psi = relaxation_from_viscosity(7.0 / 6.0, "d1_consistent")
    assert abs(omega - 0.25) <= 1e-16
    assert abs(psi - 1.75) <= 1e-15


@pytest.mark.parametrize("strategy", ["d1_smooth", "d1_consistent"])
def test_effective_viscosity_matches_target(strategy):
    # both parameterizations must realise nu_ef = (1/w - 1/2) - cs2 psi/w = nu
    rng = np.random.default_rng(8128)
    for nu in rng.uniform(0.01, 2.0, size=500):
        omega, psi = relaxation_from_viscosity(nu, strategy)
        nu_ef = (1.0 / omega - 0.5) - CS2 * psi / omega
        assert abs(nu_ef - nu) <= 1e-14


def test_relaxation_rejects_unknown_strategy():
    with pytest.raises(ValueError):
        relaxation_from_viscosity(1.0, "d2_exotic")


def test_alpha_relaxation_values():
    assert alpha_relaxation(200, 0.0) == 2.0
    assert abs(alpha_relaxation(200, 1.0) - 1.9997000449932507) <= 1e-16


@pytest.mark.parametrize("n_x,chi", [(200, 1.0), (100, 1.0), (50, 0.3),
                                     (400, 2.0)])
def test_alpha_relaxation_diffusivity_identity(n_x, chi):
    # the rate must realise the diffusivity cs2 (1/w - 1/2) = eps^2 chi
    omega = alpha_relaxation(n_x, chi)
    eps = 1.0 / n_x
    assert abs(CS2 * (1.0 / omega - 0.5) - eps * eps * chi) <= 1e-16


def test_inlet_ramp():
    assert inlet_ramp(0, 500_000, 2.5e-3, 1.0e-2) == 2.5e-3
    assert inlet_ramp(500_000, 500_000, 0.0, 1.0) == 0.7615941559557649
    assert abs(inlet_ramp(50_000_000, 500_000, 0.0, 1.0) - 1.0) <= 1e-15


# --------------------------------------------------------- simplex projection

def test_spalding_bound_feasible_pairs():
    ag, al = spalding_bound(np.array([0.25]), np.array([0.75]))
    assert ag[0] == 0.25 and al[0] == 0.75
    ag, al = spalding_bound(np.array([0.3]), np.array([0.7]))
    # 0.3 + 0.7 is not exactly 1 in binary, so the projection nudges it
    assert abs(ag[0] - 0.3) <= 1e-15 and abs(al[0] - 0.7) <= 1e-15
    assert ag[0] + al[0] == 1.0


def test_spalding_bound_clamps_overshoots():
    ag, al = spalding_bound(np.array([-0.1]), np.array([0.9]))
    assert (ag[0], al[0]) == (0.0, 1.0)
    ag, al = spalding_bound(np.array([1.2]), np.array([0.3]))
    assert ag[0] == 0.7692307692307692
    assert al[0] == 0.23076923076923084
    assert ag[0] + al[0] == 1.0


def test_spalding_bound_randomized_simplex_property():
    rng = np.random.default_rng(977)
    raw_g = rng.uniform(-0.5, 1.5, size=20_000)
    raw_l = rng.uniform(-0.5, 1.5, size=20_000)
    # drop pairs that are degenerate by construction
    keep = ~((raw_g <= 0.0) & (raw_l <= 0.0))
    ag, al = spalding_bound(raw_g[keep], raw_l[keep])
    assert np.all(ag + al == 1.0)
    assert np.all((ag >= 0.0) & (ag <= 1.0))
    assert np.all((al >= 0.0) & (al <= 1.0))


def test_spalding_bound_aborts_on_empty_pair():
    with pytest.raises(SolverAbort, match="node 1"):
        spalding_bound(np.array([0.5, -0.2]), np.array([0.5, 0.0]))


def test_project_alpha_state_is_identity_on_feasible_states():
    cfg = replace(preset(1), n_x=16)
    state = init_state(cfg)
    alpha = np.linspace(0.2, 0.8, 16)
    state.f_ag = equilibrium_standard(alpha, 0.003)
    state.f_al = equilibrium_standard(1.0 - alpha, 0.001)
    before_g, before_l = state.f_ag.copy(), state.f_al.copy()
    project_alpha_state(state)
    assert np.abs(state.f_ag - before_g).max() <= 1e-15
    assert np.abs(state.f_al - before_l).max() <= 1e-15
    assert state.proj_drift <= 1e-14


def test_project_alpha_state_zeroes_a_negative_scheme():
    cfg = replace(preset(1), n_x=8)
    state = init_state(cfg)
    state.f_ag = equilibrium_standard(np.full(8, -0.15), 0.002)
    state.f_al = equilibrium_standard(np.full(8, 0.85), 0.004)
    m0_before, m1_before, _ = moments(state.f_al)
    project_alpha_state(state)
    # the negative-moment scheme carries no mass and is cleared outright
    assert np.array_equal(state.f_ag, np.zeros((8, 3)))
    m0, m1, _ = moments(state.f_al)
    assert np.abs(m0 - 1.0).max() <= 1e-15
    # rescaling preserves the advected velocity m1/m0
    ratio_before = m1_before / m0_before
    assert np.abs(m1 / m0 - ratio_before).max() <= 1e-12 * np.abs(ratio_before).max()
    assert abs(state.proj_drift - 0.15) <= 1e-12


def test_project_alpha_state_aborts_when_both_schemes_are_empty():
    cfg = replace(preset(1), n_x=8)
    state = init_state(cfg)
    state.f_ag = equilibrium_standard(np.full(8, -0.1), 0.0)
    state.f_al = equilibrium_standard(np.full(8, -0.2), 0.0)
    with pytest.raises(SolverAbort, match="non-positive"):
        project_alpha_state(state)


# -------------------------------------------------------------- EOS coupling

def test_compute_phi():
    # at eps_l = 1 + (eps_g-1)/R the pinned product equals eps_l, so phi = 1
    assert compute_phi(1.02, 1.01, 2.0) == 1.0
    assert compute_phi(1.002, 1.0, 833.3) == 1.000002400096004
    with pytest.raises(SolverAbort, match="non-positive liquid"):
        compute_phi(1.0, np.array([0.5, -0.1]), 2.0)


# ------------------------------------------------------- mass-exchange source

def test_lks_source_vanishes_on_uniform_flux():
    c = np.full(40, 3.7e-3)
    assert np.array_equal(lks_source(c), np.zeros(40))
    assert np.array_equal(lks_source(c, periodic=True), np.zeros(40))


def test_lks_source_linear_flux_gives_slope_minus_slope_squared():
    # on c[i] = c0 + s*i the sampled divergence is s - s^2 at every node,
    # including the ends (linear extrapolation keeps the profile linear)
    s = 0.004
    c = 1e-3 + s * np.arange(30, dtype=float)
    out = lks_source(c)
    assert np.abs(out - (s - s * s)).max() <= 1e-15
    assert abs(out[0] - 0.003984) <= 1e-15
    assert abs(out[-1] - out[15]) <= 1e-15


def test_lks_source_boundary_extrapolation_matches_interior_on_linear_data():
    c = 0.002 * np.arange(12, dtype=float)
    out = lks_source(c)
    assert np.abs(out - out[5]).max() <= 1e-15


# ----------------------------------------------------------------- stress

def test_stress_vanishes_at_equilibrium():
    pi_eq = CS2 * 1.0 + 0.0
    f = np.array([1.0 - pi_eq, pi_eq / 2.0, pi_eq / 2.0])
    assert stress_1d(f, pi_eq, 0.6, 0.0, 0.0, 7.0 / 6.0) == 0.0


def test_stress_from_second_moment_deficit():
    pi = CS2 - 1e-6
    f = np.array([0.0, pi / 2.0, pi / 2.0])
    sigma = stress_1d(f, CS2, 0.6, 0.0, 0.0, 7.0 / 6.0)
    # the deficit comes from cancelling two numbers near cs2, so absolute
    # rounding at the 1e-16 level is expected
    assert abs(sigma - 7.0 / 6.0 * 0.6 * 1e-6) <= 1e-16


def test_stress_bulk_term_path():
    # d1_consistent carries part of the stress through psi cs2 S
    f = np.array([1.0 - CS2, CS2 / 2.0, CS2 / 2.0])
    sigma = stress_1d(f, CS2, 0.25, 1.75, 0.01, 1.0)
    assert abs(sigma - 1.75 * CS2 * 0.01) <= 1e-18


# --------------------------------------------------- volume-fraction gradient

def test_gradient_over_alpha_reads_the_velocity_lag():
    omega_a = alpha_relaxation(200, 1.0)
    f = equilibrium_standard(np.full(6, 1.0), np.full(6, 0.001))
    out = gradient_over_alpha(f, np.full(6, 0.002), omega_a)
    expected = (omega_a / CS2) * 0.001
    assert np.abs(out - expected).max() <= 1e-12 * expected


def test_gradient_over_alpha_zero_when_scheme_rides_the_flow():
    omega_a = alpha_relaxation(100, 1.0)
    f = equilibrium_standard(np.full(6, 0.4), np.full(6, 0.005))
    out = gradient_over_alpha(f, np.full(6, 0.005), omega_a)
    assert np.abs(out).max() <= 1e-15


def test_symmetrize_gradients():
    g, l = symmetrize_gradients(np.array([0.01]), np.array([-0.01]))
    assert g[0] == 0.01 and l[0] == -0.01
    g, l = symmetrize_gradients(np.array([0.02]), np.array([0.0]))
    assert g[0] == 0.01 and l[0] == -0.01
    g, l = symmetrize_gradients(np.array([0.0]), np.array([0.0]))
    assert g[0] == 0.0 and l[0] == 0.0


def test_symmetrize_gradients_sum_is_exactly_zero():
    rng = np.random.default_rng(555)
    a = rng.uniform(-0.1, 0.1, size=10_000)
    b = rng.uniform(-0.1, 0.1, size=10_000)
    g, l = symmetrize_gradients(a, b)
    assert np.all(g + l == 0.0)
    assert np.array_equal(l, -g)


# ------------------------------------------------------------------- forces

def test_phase_forces_drag_and_buoyancy_budget():
    n1 = np.ones(1)
    force_g, force_l = phase_forces(
        u_g=0.004 * n1, u_l=0.002 * n1, s_g=0.0 * n1, s_l=0.0 * n1,
        sigma_g=0.0 * n1, sigma_l=0.0 * n1, grad_g=0.0 * n1, grad_l=0.0 * n1,
        alpha_g=0.5 * n1, alpha_l=0.5 * n1, k_i=1e-2 * n1, k_w=0.0 * n1,
        ratio=2.0, g_hat=1e-6)
    # gas: buoyancy 1e-6 minus drag (k_i/alpha)|slip|slip = 8e-8
    assert abs(force_g[0] - 9.2e-7) <= 1e-21
    # liquid: the same drag pushed forward, scaled by 1/(R alpha_l)
    assert abs(force_l[0] - 4e-8) <= 1e-22


def test_phase_forces_slip_free_state_feels_only_buoyancy():
    z = np.zeros(3)
    u = np.full(3, 0.005)
    force_g, force_l = phase_forces(u, u, z, z, z, z, z, z,
                                    np.full(3, 0.5), np.full(3, 0.5),
                                    z, z, ratio=2.0, g_hat=1e-6)
    assert np.all(force_g == 1e-6)
    assert np.all(force_l == 0.0)


def test_phase_forces_survive_vanishing_fractions():
    z = np.zeros(2)
    force_g, force_l = phase_forces(z, z, z, z, z, z, z, z,
                                    np.zeros(2), np.ones(2),
                                    np.full(2, 1e-2), z, ratio=2.0,
                                    g_hat=1e-6)
    assert np.all(np.isfinite(force_g)) and np.all(np.isfinite(force_l))


# -------------------------------------------------- collision and propagation

def test_bgk_collide_limits():
    rng = np.random.default_rng(31337)
    f = rng.uniform(0.1, 0.5, size=(10, 3))
    f_eq = rng.uniform(0.1, 0.5, size=(10, 3))
    assert np.array_equal(bgk_collide(f, f_eq, 0.0), f)
    assert np.abs(bgk_collide(f, f_eq, 1.0) - f_eq).max() <= 1e-15
    forcing = rng.uniform(-0.01, 0.01, size=(10, 3))
    out = bgk_collide(f, f_eq, 0.0, forcing)
    assert np.array_equal(out, f + forcing)


def test_stream_periodic_rolls_the_moving_populations():
    star = np.arange(12.0).reshape(4, 3)
    out = stream_1d(star, periodic=True)
    assert np.array_equal(out[:, 0], star[:, 0])
    assert np.array_equal(out[:, 1], np.roll(star[:, 1], 1))
    assert np.array_equal(out[:, 2], np.roll(star[:, 2], -1))


def test_stream_tube_shifts_and_inserts_boundary_inflow():
    star = np.arange(12.0).reshape(4, 3)
    out = stream_1d(star, inlet_value=99.0, outlet_value=-7.0)
    assert np.array_equal(out[1:, 1], star[:-1, 1])
    assert np.array_equal(out[:-1, 2], star[1:, 2])
    assert out[0, 1] == 99.0
    assert out[-1, 2] == -7.0
    assert np.array_equal(out[:, 0], star[:, 0])


def test_bounce_back_is_identity_for_symmetric_wall_equilibrium():
    eq_wall = equilibrium_standard(1.0, 0.0)  # eq[1] == eq[2]
    assert bounce_back_in(0.123, eq_wall, q_in=1) == 0.123
    eq_moving = equilibrium_standard(1.0, 0.01)
    out = bounce_back_in(0.123, eq_moving, q_in=1)
    assert abs(out - (0.123 + eq_moving[1] - eq_moving[2])) <= 1e-16


def test_anti_bounce_back_algebra():
    eq_wall = equilibrium_standard(1.0, 0.004)
    out = anti_bounce_back_in(0.2, eq_wall, q_in=2)
    assert abs(out - (-0.2 + eq_wall[2] + eq_wall[1])) <= 1e-18
