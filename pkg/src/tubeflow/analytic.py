"""Closed-form steady-state relations and physical<->lattice similarity scaling.

In the flat-gradient regime (all x-derivatives zero) the two momentum balances
collapse to an algebraic system: buoyancy vs. interphase drag in the gas,
interphase drag vs. wall friction in the liquid.  These closed forms provide
an independent oracle for the steady outlet state of the full solvers.
"""

import math
from dataclasses import dataclass


def bubble_column_velocity(alpha_g, ratio, g_hat, k_i_hat):
    """Gas velocity at zero liquid velocity (classic bubble-column balance).

    Solves (R-1) g = K_I/(alpha_g alpha_l) |u| u for u >= 0:
    u = sqrt(alpha_g (1-alpha_g) (R-1) g / K_I).  Also used for the minimum
    inlet velocity of the ramp-up presets.
    """
    if not 0.0 < alpha_g < 1.0:
        raise ValueError(f"alpha_g must be in (0, 1), got {alpha_g}")
    return math.sqrt(alpha_g * (1.0 - alpha_g) * (ratio - 1.0) * g_hat / k_i_hat)


def steady_liquid_velocity(u_g_bar, u_g0_bar, r):
    """Steady liquid velocity given the gas velocity in the same regime.

    r = (K_W/K_I) * alpha_g_bar weighs wall friction against interphase drag.
    The quadratic wall/drag balance r u_l^2 = (u_g - u_l)^2 - u_g0^2 admits

        u_l = [u_g - sqrt(u_g^2 - (1-r)(u_g^2 - u_g0^2))] / (1-r)

    which is 0/0 at r = 1; there the limit (u_g - u_g0)(1 + u_g0/u_g)/2 is
    used instead.  Inputs must satisfy u_g > u_g0 (circulation regime with
    u_l < u_g).
    """
    if u_g_bar <= u_g0_bar:
        raise ValueError(
            f"outside the circulation regime: u_g_bar = {u_g_bar} <= u_g0_bar = {u_g0_bar}")
    if r < 0.0:
        raise ValueError(f"r must be >= 0, got {r}")
    if r == 1.0:
        return (u_g_bar - u_g0_bar) * (1.0 + u_g0_bar / u_g_bar) / 2.0
    disc = u_g_bar**2 - (1.0 - r) * (u_g_bar**2 - u_g0_bar**2)
    if disc < 0.0:
        raise ValueError(f"negative discriminant {disc}: inputs outside the derived regime")
    return (u_g_bar - math.sqrt(disc)) / (1.0 - r)


def cgw_lambda(alpha_g, ratio):
    """Volume-fraction weight of the CGW drag closure.

    Lambda = alpha_g alpha_l (alpha_g + alpha_l R); tends to alpha_g R for
    small gas fractions (dilute bubbles) and to alpha_l for small liquid
    fractions (droplets), bridging the two dispersed regimes.
    """
    alpha_l = 1.0 - alpha_g
    return alpha_g * alpha_l * (alpha_g + alpha_l * ratio)


@dataclass
class SteadyRegime:
    """Flat-gradient steady state at a station (usually the outlet)."""
    u_g_bar: float
    u_l_bar: float
    u_g0_bar: float
    alpha_g_bar: float
    alpha_l_bar: float
    r: float


def steady_regime(u_g_bar, alpha_g_bar, ratio, g_hat, k_i_hat, k_w_hat):
    """Build the analytic steady regime consistent with (u_g_bar, alpha_g_bar)."""
    u_g0 = bubble_column_velocity(alpha_g_bar, ratio, g_hat, k_i_hat)
    r = (k_w_hat / k_i_hat) * alpha_g_bar
    u_l = steady_liquid_velocity(u_g_bar, u_g0, r)
    return SteadyRegime(u_g_bar=u_g_bar, u_l_bar=u_l, u_g0_bar=u_g0,
                        alpha_g_bar=alpha_g_bar, alpha_l_bar=1.0 - alpha_g_bar, r=r)


@dataclass
class SimilarityScale:
    """Conversion factors between physical and lattice units."""
    c: float            # lattice speed (physical velocity units)
    tau: float          # collision time (physical time units)
    c_over_tau: float
    c_times_tau: float


def similarity_scale(g_phys, kappa_i_phys, g_hat, kappa_i_hat):
    """Derive the lattice speed/time from matching gravity and drag.

    c/tau = g/g_hat and c*tau = kappa_I_hat/kappa_I fix c = sqrt of the
    product; velocities map as u_hat = u/c, times as t_hat = t/tau.
    """
    if min(g_phys, kappa_i_phys, g_hat, kappa_i_hat) <= 0:
        raise ValueError("similarity inputs must all be positive")
    c_over_tau = g_phys / g_hat
    c_times_tau = kappa_i_hat / kappa_i_phys
    c = math.sqrt(c_over_tau * c_times_tau)
    return SimilarityScale(c=c, tau=c / c_over_tau,
                           c_over_tau=c_over_tau, c_times_tau=c_times_tau)


def momentum_ratio(kappa_i, alpha_g_ref, u_g_ref, u_l_ref, ratio, g):
    """Ratio of interphase-drag magnitude to buoyancy at a reference state.

    M = kappa_I Lambda(alpha_g) |u_g - u_l|^2 / (alpha_g (R-1) g); invariant
    under the similarity map, so it can be evaluated in either unit system.
    """
    if alpha_g_ref <= 0 or ratio <= 1 or g <= 0:
        raise ValueError("momentum_ratio denominators must be positive")
    slip = u_g_ref - u_l_ref
    return (kappa_i * cgw_lambda(alpha_g_ref, ratio) * slip * slip
            / (alpha_g_ref * (ratio - 1.0) * g))
