"""Finite-difference reference engine for the vertical-tube two-phase flow.

Solves the same four-field system as the lattice engine -- kinematic
pressure, gas and liquid velocities, gas volume fraction -- on the identical
node grid and in the identical scaled units, so profiles from the two
engines can be compared without any unit juggling.  Spatial derivatives are
plain central differences acting on boundary-wrapped nodal vectors; time
integration is an adaptive Dormand-Prince 4(5) pair; every 100 accepted
steps the four solution vectors pass through a Gaussian-weighted moving
average to suppress the checkerboard mode that node-centered central
differences leave undamped.

Like the lattice engine, two interchangeable drivers are provided: a plain
numpy path (``use_kernel=False``) that leans on the public operations below,
and a fused numba kernel that repeats the same arithmetic expression for
expression.  Their trajectories agree to rounding noise.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .analytic import cgw_lambda
from .config import ScenarioConfig
from .lattice import CS2
from .lbm import (ALPHA_FLOOR, SolverAbort, default_snapshot_steps,
                  inlet_ramp)
from ._lbm_kernels import (PF_A_MAX, PF_A_MIN, PF_G, PF_GAMMA, PF_KAPPA_I,
                           PF_KAPPA_W, PF_KI, PF_KW, PF_NU_G, PF_NU_L,
                           PF_RATIO, PF_UG_MAX, PF_UG_MIN, PF_UL_MAX,
                           PF_UL_MIN, PI_N_RAMP, pack_params)

RTOL = 1e-6                 # relative tolerance of the embedded pair
ATOL = 1e-9                 # absolute tolerance per component
MIN_STEP = 1e-6             # controller underflow -> abort
SMOOTH_EVERY = 100          # accepted steps between smoothing passes
SMOOTH_WINDOW = 12          # nominal Gaussian window length (nodes)
STEADY_RATE_TOL = 1e-10     # max change per unit scaled time
STEADY_CYCLES = 3           # consecutive quiet smoothing cycles

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0

# Dormand-Prince 4(5) tableau.  Row s of A holds the combination weights of
# stages 0..s-1; row 6 equals the 5th-order solution weights, so stage 7 is
# the first stage of the next step (FSAL).
DOPRI_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
DOPRI_A = np.zeros((7, 6))
DOPRI_A[1, :1] = [1 / 5]
DOPRI_A[2, :2] = [3 / 40, 9 / 40]
DOPRI_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
DOPRI_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
DOPRI_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176,
                  -5103 / 18656]
DOPRI_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784,
                  11 / 84]
DOPRI_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                     -92097 / 339200, 187 / 2100, 1 / 40])
DOPRI_E = np.append(DOPRI_A[6], 0.0) - DOPRI_B4


# ---------------------------------------------------------------------------
# difference operators and boundary wrapping

def dx(wrapped):
    """Central first difference of a wrapped vector (length N+2 -> N)."""
    return (wrapped[2:] - wrapped[:-2]) / 2.0


def dx2(wrapped):
    """Central second difference of a wrapped vector (length N+2 -> N)."""
    return wrapped[2:] - 2.0 * wrapped[1:-1] + wrapped[:-2]


def wrap(values, which, inlet_value=None):
    """Extend a nodal vector with its two ghost values.

    The kinematic pressure gets an extrapolated inlet ghost and a Dirichlet
    outlet ghost pinning p_k = c_s^2 half-way past the last node; velocities
    and the volume fraction get a Dirichlet inlet ghost at the (ramped) feed
    value and an extrapolated outlet ghost.
    """
    v = np.asarray(values, dtype=float)
    w = np.empty(v.size + 2)
    w[1:-1] = v
    if which == "p_k":
        w[0] = 2.0 * v[0] - v[1]
        w[-1] = 2.0 * CS2 - v[-1]
    elif which in ("u_g", "u_l", "alpha_g"):
        if inlet_value is None:
            raise ValueError(f"{which} wrapping needs the current inlet value")
        w[0] = 2.0 * inlet_value - v[0]
        w[-1] = 2.0 * v[-1] - v[-2]
    else:
        raise ValueError(f"unknown field {which!r}")
    return w


def _gaussian_taps(window=SMOOTH_WINDOW):
    half = window // 2
    sigma = (window - 1) / 5.0
    offsets = np.arange(-half, half + 1, dtype=float)
    return np.exp(-0.5 * (offsets / sigma) ** 2)


def gaussian_smooth(values, window=SMOOTH_WINDOW):
    """Gaussian-weighted moving average over a centered window.

    Near the domain ends the window is truncated symmetrically (it shrinks
    to the largest centered window that fits) and the weights renormalized.
    Symmetric truncation keeps the filter free of first-order bias at every
    node -- a one-sided truncation shifts an end value by roughly 1.5 nodes
    of local slope per pass, which accumulated over thousands of passes
    builds a spurious boundary layer -- so constants pass through unchanged,
    linear ramps are preserved everywhere, and the two end values are kept
    exactly.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    taps = _gaussian_taps(window)
    half = (taps.size - 1) // 2
    if n >= taps.size:
        num = np.convolve(v, taps, mode="same")
        den = np.convolve(np.ones_like(v), taps, mode="same")
        out = num / den
    else:
        # convolve(mode="same") returns taps.size values when the vector is
        # the shorter operand; on such short vectors every node is within
        # half a window of an end anyway, so the truncated loop does it all
        out = np.empty_like(v)
    for i in list(range(min(half, n))) + list(range(max(0, n - half), n)):
        h = min(i, n - 1 - i, half)
        w = taps[half - h:half + h + 1]
        out[i] = (w * v[i - h:i + h + 1]).sum() / w.sum()
    return out


# ---------------------------------------------------------------------------
# state and right-hand side

@dataclass
class FDState:
    """Nodal solution vectors of the finite-difference engine."""
    p_k: np.ndarray
    u_g: np.ndarray
    u_l: np.ndarray
    alpha_g: np.ndarray

    def flat(self):
        return np.concatenate([self.p_k, self.u_g, self.u_l, self.alpha_g])


def state_from_flat(y, n_x):
    return FDState(p_k=y[0:n_x], u_g=y[n_x:2 * n_x],
                   u_l=y[2 * n_x:3 * n_x], alpha_g=y[3 * n_x:4 * n_x])


def init_state(cfg: ScenarioConfig) -> FDState:
    """Rest state matching the lattice engine's start: p_k = c_s^2,
    both velocities zero, minimum gas loading."""
    n = cfg.n_x
    return FDState(p_k=np.full(n, CS2), u_g=np.zeros(n), u_l=np.zeros(n),
                   alpha_g=np.full(n, cfg.alpha_g_min))


def closure_terms(state: FDState, cfg: ScenarioConfig, t_hat):
    """Dashpotted mass-exchange sources and drag coefficient vectors
    evaluated on the instantaneous state (the refresh values of the
    freezing grid)."""
    ratio = cfg.density_ratio
    ug_in = inlet_ramp(t_hat, cfg.n_ramp, cfg.u_g_min, cfg.u_g_max)
    ul_in = inlet_ramp(t_hat, cfg.n_ramp, cfg.u_l_min, cfg.u_l_max)
    a_in = inlet_ramp(t_hat, cfg.n_ramp, cfg.alpha_g_min, cfg.alpha_g_max)
    gw = wrap(state.u_g, "u_g", ug_in)
    lw = wrap(state.u_l, "u_l", ul_in)
    aw = wrap(state.alpha_g, "alpha_g", a_in)
    alw = 1.0 - aw
    s_g = dx(alw * (gw - lw))
    s_l = dx(aw * (lw - gw))
    epsdev = state.p_k / CS2 - 1.0
    s2g = s_g - cfg.gamma * state.u_g * state.u_g * epsdev
    s2l = s_l - cfg.gamma * state.u_l * state.u_l * epsdev / ratio
    if cfg.drag_model == "cgw":
        lam = cgw_lambda(np.clip(state.alpha_g, 0.0, 1.0), ratio)
        k_i = cfg.kappa_i_hat * lam
        k_w = cfg.kappa_w_hat * lam
    else:
        k_i = np.full(cfg.n_x, cfg.k_i_hat)
        k_w = np.full(cfg.n_x, cfg.k_w_hat)
    return s2g, s2l, k_i, k_w


def rhs(state: FDState, cfg: ScenarioConfig, t_hat, frozen=None) -> FDState:
    """Time derivative of the four nodal vectors.

    With frozen=None the sources and drag coefficients are evaluated on the
    spot; passing the (s2g, s2l, k_i, k_w) tuple reproduces the freezing-grid
    behaviour of the lattice engine.
    """
    ratio = cfg.density_ratio
    ug_in = inlet_ramp(t_hat, cfg.n_ramp, cfg.u_g_min, cfg.u_g_max)
    ul_in = inlet_ramp(t_hat, cfg.n_ramp, cfg.u_l_min, cfg.u_l_max)
    a_in = inlet_ramp(t_hat, cfg.n_ramp, cfg.alpha_g_min, cfg.alpha_g_max)

    pw = wrap(state.p_k, "p_k")
    gw = wrap(state.u_g, "u_g", ug_in)
    lw = wrap(state.u_l, "u_l", ul_in)
    aw = wrap(state.alpha_g, "alpha_g", a_in)
    alw = 1.0 - aw

    if frozen is None:
        s2g, s2l, k_i, k_w = closure_terms(state, cfg, t_hat)
    else:
        s2g, s2l, k_i, k_w = frozen

    sig_g = cfg.nu_g * dx(gw)
    sig_l = cfg.nu_l * dx(lw)
    ag_div = np.maximum(state.alpha_g, ALPHA_FLOOR)
    al_div = np.maximum(1.0 - state.alpha_g, ALPHA_FLOOR)
    slip = state.u_l - state.u_g
    rslip = state.u_g - state.u_l

    # the pressure equation carries the raw instantaneous exchange
    # divergence; the dashpot and the freezing grid apply only to the
    # momentum closures.  Routing the stabilized source in here instead
    # injects a spurious O(gamma u_g^2 eps_dev) mass source that tilts the
    # mixture flux and, at large density ratios, the liquid velocity.
    dp = -CS2 * dx(gw) + CS2 * dx(alw * (gw - lw))
    du_g = (-dx(gw * gw) - dx(pw) + cfg.nu_g * dx2(gw)
            + s2g * state.u_g + (sig_g / ag_div) * dx(aw)
            + (ratio - 1.0) * cfg.g_hat
            + (k_i / ag_div) * np.abs(slip) * slip)
    du_l = (-dx(lw * lw) - dx(pw) / ratio + cfg.nu_l * dx2(lw)
            + s2l * state.u_l + (sig_l / al_div) * dx(alw)
            + (k_i / (ratio * al_div)) * np.abs(rslip) * rslip
            - (k_w / (ratio * al_div)) * np.abs(state.u_l) * state.u_l)
    da = -dx(aw * gw)
    return FDState(p_k=dp, u_g=du_g, u_l=du_l, alpha_g=da)


# ---------------------------------------------------------------------------
# adaptive Dormand-Prince driver (generic, plain python)

def integrate_ode(f, t0, y0, t1, rtol=RTOL, atol=ATOL, max_step=np.inf,
                  first_step=None, min_step=MIN_STEP, accepted_hook=None):
    """Integrate dy/dt = f(t, y) with the embedded 4(5) pair.

    Per-component error control with scaled-RMS norm; step factors are
    SAFETY * err^(-1/5) clipped to [MIN_FACTOR, MAX_FACTOR].  After each
    accepted step the optional hook(n_accepted, t, y) may return a modified
    state vector (clamping, smoothing); doing so invalidates the FSAL stage,
    which is then recomputed.  Returns (t, y, h, n_accepted) with h the
    controller's current step so a follow-up call can resume seamlessly.
    """
    t = float(t0)
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    m = y.size
    k = np.empty((7, m))
    k[0] = f(t, y)
    h = min(max_step, 1.0 if first_step is None else first_step)
    n_acc = 0

    while t1 - t > 1e-12 * max(1.0, abs(t1)):
        if h < min_step:
            raise SolverAbort(f"time step {h:.3e} underflowed below "
                              f"{min_step:g} at t_hat {t:.6g}")
        hs = h if h <= t1 - t else t1 - t
        clamped = hs < h
        for s in range(1, 6):
            acc = DOPRI_A[s, 0] * k[0]
            for q in range(1, s):
                acc = acc + DOPRI_A[s, q] * k[q]
            k[s] = f(t + DOPRI_C[s] * hs, y + hs * acc)
        acc = DOPRI_A[6, 0] * k[0]
        for q in range(1, 6):
            acc = acc + DOPRI_A[6, q] * k[q]
        y5 = y + hs * acc
        k[6] = f(t + hs, y5)
        ev = DOPRI_E[0] * k[0]
        for q in range(1, 7):
            ev = ev + DOPRI_E[q] * k[q]
        ev = hs * ev
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.max(np.abs(ev / scale)))

        if err <= 1.0:
            t = t + hs
            y = y5
            k[0] = k[6]
            n_acc += 1
            if accepted_hook is not None:
                mod = accepted_hook(n_acc, t, y)
                if mod is not None:
                    y = np.asarray(mod, dtype=float)
                    k[0] = f(t, y)
            if not clamped:
                if err == 0.0:
                    fac = MAX_FACTOR
                else:
                    fac = min(MAX_FACTOR, max(MIN_FACTOR,
                                              SAFETY * err ** -0.2))
                h = min(max_step, h * fac)
        else:
            if math.isfinite(err) and err > 0.0:
                fac = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** -0.2))
            else:
                fac = MIN_FACTOR
            h = hs * fac
    return t1, y, h, n_acc


# ---------------------------------------------------------------------------
# fused numba path: identical arithmetic, scalar loops

@njit(inline="always")
def _ghost(v, i, n, g_lo, g_hi):
    if i < 0:
        return g_lo
    if i >= n:
        return g_hi
    return v[i]


@njit(cache=True)
def _rhs_flat(t, y, out, pf, pi, s2g, s2l, ki, kw, use_frozen, cgw):
    n = y.size // 4
    p = y[0:n]
    ug = y[n:2 * n]
    ul = y[2 * n:3 * n]
    ag = y[3 * n:4 * n]
    ratio = pf[PF_RATIO]
    g_hat = pf[PF_G]
    gamma = pf[PF_GAMMA]
    nu_g = pf[PF_NU_G]
    nu_l = pf[PF_NU_L]
    kap_i, kap_w = pf[PF_KAPPA_I], pf[PF_KAPPA_W]
    k_i0, k_w0 = pf[PF_KI], pf[PF_KW]

    th = math.tanh(t / pi[PI_N_RAMP])
    a_in = (pf[PF_A_MAX] - pf[PF_A_MIN]) * th + pf[PF_A_MIN]
    ug_in = (pf[PF_UG_MAX] - pf[PF_UG_MIN]) * th + pf[PF_UG_MIN]
    ul_in = (pf[PF_UL_MAX] - pf[PF_UL_MIN]) * th + pf[PF_UL_MIN]

    p_lo = 2.0 * p[0] - p[1]
    p_hi = 2.0 * CS2 - p[n - 1]
    g_lo = 2.0 * ug_in - ug[0]
    g_hi = 2.0 * ug[n - 1] - ug[n - 2]
    l_lo = 2.0 * ul_in - ul[0]
    l_hi = 2.0 * ul[n - 1] - ul[n - 2]
    a_lo = 2.0 * a_in - ag[0]
    a_hi = 2.0 * ag[n - 1] - ag[n - 2]

    for i in range(n):
        pm = _ghost(p, i - 1, n, p_lo, p_hi)
        pp = _ghost(p, i + 1, n, p_lo, p_hi)
        gm = _ghost(ug, i - 1, n, g_lo, g_hi)
        gp = _ghost(ug, i + 1, n, g_lo, g_hi)
        lm = _ghost(ul, i - 1, n, l_lo, l_hi)
        lp = _ghost(ul, i + 1, n, l_lo, l_hi)
        am = _ghost(ag, i - 1, n, a_lo, a_hi)
        ap = _ghost(ag, i + 1, n, a_lo, a_hi)
        g0 = ug[i]
        l0 = ul[i]
        a0 = ag[i]

        dx_ug = (gp - gm) / 2.0
        dx_ul = (lp - lm) / 2.0
        dx_p = (pp - pm) / 2.0
        dx_a = (ap - am) / 2.0
        dx_al = ((1.0 - ap) - (1.0 - am)) / 2.0

        # raw exchange divergence: always current, feeds the pressure row
        sgi = ((1.0 - ap) * (gp - lp) - (1.0 - am) * (gm - lm)) / 2.0
        if use_frozen:
            s2gi = s2g[i]
            s2li = s2l[i]
            kii = ki[i]
            kwi = kw[i]
        else:
            sli = (ap * (lp - gp) - am * (lm - gm)) / 2.0
            epsdev = p[i] / CS2 - 1.0
            s2gi = sgi - gamma * g0 * g0 * epsdev
            s2li = sli - gamma * l0 * l0 * epsdev / ratio
            if cgw:
                acl = min(max(a0, 0.0), 1.0)
                alc = 1.0 - acl
                lam = acl * alc * (acl + alc * ratio)
                kii = kap_i * lam
                kwi = kap_w * lam
            else:
                kii = k_i0
                kwi = k_w0

        sig_g = nu_g * dx_ug
        sig_l = nu_l * dx_ul
        a_div = max(a0, ALPHA_FLOOR)
        al_div = max(1.0 - a0, ALPHA_FLOOR)
        slip = l0 - g0
        rslip = g0 - l0

        out[i] = -CS2 * dx_ug + CS2 * sgi
        out[n + i] = (-(gp * gp - gm * gm) / 2.0 - dx_p
                      + nu_g * (gp - 2.0 * g0 + gm)
                      + s2gi * g0 + (sig_g / a_div) * dx_a
                      + (ratio - 1.0) * g_hat
                      + (kii / a_div) * abs(slip) * slip)
        out[2 * n + i] = (-(lp * lp - lm * lm) / 2.0 - dx_p / ratio
                          + nu_l * (lp - 2.0 * l0 + lm)
                          + s2li * l0 + (sig_l / al_div) * dx_al
                          + (kii / (ratio * al_div)) * abs(rslip) * rslip
                          - (kwi / (ratio * al_div)) * abs(l0) * l0)
        out[3 * n + i] = -(ap * gp - am * gm) / 2.0


@njit(cache=True)
def _smooth_block(v, taps, out):
    n = v.size
    half = (taps.size - 1) // 2
    for i in range(n):
        h = half
        if i < h:
            h = i
        if n - 1 - i < h:
            h = n - 1 - i
        num = 0.0
        den = 0.0
        for j in range(i - h, i + h + 1):
            wj = taps[j - i + half]
            num += wj * v[j]
            den += wj
        out[i] = num / den


@njit(cache=True)
def _advance_fd(y, meta, counters, cycle_y, t_end, pf, pi,
                s2g, s2l, ki, kw, use_frozen, cgw, taps,
                rtol, atol, min_step, smooth_every):
    """Advance the flat state to t_end; returns 0 (reached), 1 (steady
    detected at a smoothing cycle) or 2 (step-size underflow).

    meta = [t, h, t_of_last_cycle, have_cycle]; counters = [accepted,
    quiet_cycles]; cycle_y holds the state at the last smoothing pass.
    """
    m = y.size
    n = m // 4
    t = meta[0]
    h = meta[1]
    k = np.empty((7, m))
    ys = np.empty(m)
    y5 = np.empty(m)
    tmp = np.empty(n)
    _rhs_flat(t, y, k[0], pf, pi, s2g, s2l, ki, kw, use_frozen, cgw)
    status = 0

    while t_end - t > 1e-12 * max(1.0, abs(t_end)):
        if h < min_step:
            status = 2
            break
        hs = h if h <= t_end - t else t_end - t
        clamped = hs < h
        for s in range(1, 6):
            for j in range(m):
                acc = DOPRI_A[s, 0] * k[0, j]
                for q in range(1, s):
                    acc = acc + DOPRI_A[s, q] * k[q, j]
                ys[j] = y[j] + hs * acc
            _rhs_flat(t + DOPRI_C[s] * hs, ys, k[s], pf, pi,
                      s2g, s2l, ki, kw, use_frozen, cgw)
        for j in range(m):
            acc = DOPRI_A[6, 0] * k[0, j]
            for q in range(1, 6):
                acc = acc + DOPRI_A[6, q] * k[q, j]
            y5[j] = y[j] + hs * acc
        _rhs_flat(t + hs, y5, k[6], pf, pi, s2g, s2l, ki, kw,
                  use_frozen, cgw)
        err = 0.0
        for j in range(m):
            ev = DOPRI_E[0] * k[0, j]
            for q in range(1, 7):
                ev = ev + DOPRI_E[q] * k[q, j]
            ev = hs * ev
            sc = atol + rtol * max(abs(y[j]), abs(y5[j]))
            r = abs(ev / sc)
            if r > err:
                err = r

        if err <= 1.0:
            t = t + hs
            recompute = False
            for j in range(m):
                y[j] = y5[j]
            for i in range(3 * n, 4 * n):
                if y[i] < 0.0:
                    y[i] = 0.0
                    recompute = True
                elif y[i] > 1.0:
                    y[i] = 1.0
                    recompute = True
            counters[0] += 1
            if counters[0] % smooth_every == 0:
                for b in range(4):
                    _smooth_block(y[b * n:(b + 1) * n], taps, tmp)
                    for i in range(n):
                        y[b * n + i] = tmp[i]
                recompute = True
                if meta[3] > 0.5:
                    dt = t - meta[2]
                    dmax = 0.0
                    for j in range(m):
                        d = abs(y[j] - cycle_y[j])
                        if d > dmax:
                            dmax = d
                    if dt > 0.0 and dmax < STEADY_RATE_TOL * dt:
                        counters[1] += 1
                    else:
                        counters[1] = 0
                for j in range(m):
                    cycle_y[j] = y[j]
                meta[2] = t
                meta[3] = 1.0
                if counters[1] >= STEADY_CYCLES:
                    status = 1
                    break
            if recompute:
                _rhs_flat(t, y, k[0], pf, pi, s2g, s2l, ki, kw,
                          use_frozen, cgw)
            else:
                for j in range(m):
                    k[0, j] = k[6, j]
            if not clamped:
                if err == 0.0:
                    fac = MAX_FACTOR
                else:
                    fac = SAFETY * err ** -0.2
                    if fac > MAX_FACTOR:
                        fac = MAX_FACTOR
                    elif fac < MIN_FACTOR:
                        fac = MIN_FACTOR
                h = h * fac
        else:
            if math.isfinite(err) and err > 0.0:
                fac = SAFETY * err ** -0.2
                if fac > MAX_FACTOR:
                    fac = MAX_FACTOR
                elif fac < MIN_FACTOR:
                    fac = MIN_FACTOR
            else:
                fac = MIN_FACTOR
            h = hs * fac

    meta[0] = t_end if status == 0 else t
    meta[1] = h
    return status


# ---------------------------------------------------------------------------
# scenario driver

class _SteadyStop(Exception):
    """Internal: raised by the accepted-step hook when the smoothing-cycle
    steady criterion fires; carries the converged flat state."""

    def __init__(self, t, y):
        self.t = t
        self.y = y
        super().__init__("steady state reached")


@dataclass
class FdRun:
    config: ScenarioConfig
    snapshots: list
    runtime_seconds: float
    steady_step: float = None
    stats: dict = field(default_factory=dict)
    engine: str = "fd"


def _snapshot(y, step, cfg, frozen, use_frozen):
    """Snapshot dict with the same keys and unit conventions as the lattice
    engine's: p_k column is the pseudo-density deviation over eps^2, phi is
    the liquid EOS factor (eps_l identically 1 here)."""
    n = cfg.n_x
    ratio = cfg.density_ratio
    state = state_from_flat(y.copy(), n)
    if use_frozen:
        s2g, s2l, k_i, k_w = frozen
    else:
        s2g, s2l, k_i, k_w = closure_terms(state, cfg, step)
    ug_in = inlet_ramp(step, cfg.n_ramp, cfg.u_g_min, cfg.u_g_max)
    ul_in = inlet_ramp(step, cfg.n_ramp, cfg.u_l_min, cfg.u_l_max)
    a_in = inlet_ramp(step, cfg.n_ramp, cfg.alpha_g_min, cfg.alpha_g_max)
    gw = wrap(state.u_g, "u_g", ug_in)
    lw = wrap(state.u_l, "u_l", ul_in)
    aw = wrap(state.alpha_g, "alpha_g", a_in)
    sig_g = cfg.nu_g * dx(gw)
    sig_l = cfg.nu_l * dx(lw)
    ag_div = np.maximum(state.alpha_g, ALPHA_FLOOR)
    al_div = np.maximum(1.0 - state.alpha_g, ALPHA_FLOOR)
    slip = state.u_l - state.u_g
    rslip = state.u_g - state.u_l
    g_g = (s2g * state.u_g + (sig_g / ag_div) * dx(aw)
           + (cfg.density_ratio - 1.0) * cfg.g_hat
           + (k_i / ag_div) * np.abs(slip) * slip)
    g_l = (s2l * state.u_l + (sig_l / al_div) * dx(1.0 - aw)
           + (k_i / (ratio * al_div)) * np.abs(rslip) * rslip
           - (k_w / (ratio * al_div)) * np.abs(state.u_l) * state.u_l)
    epsdev = state.p_k / CS2 - 1.0
    return {"step": step,
            "alpha_g": state.alpha_g, "alpha_l": 1.0 - state.alpha_g,
            "u_g": state.u_g, "u_l": state.u_l,
            "p_k": epsdev / (cfg.eps * cfg.eps),
            "S_g": np.asarray(s2g).copy(), "S_l": np.asarray(s2l).copy(),
            "sigma_g": sig_g, "sigma_l": sig_l,
            "G_g": g_g, "G_l": g_l,
            "phi": 1.0 + epsdev / ratio}


def run(cfg: ScenarioConfig, snapshot_steps=None, use_kernel=True,
        smooth_every=SMOOTH_EVERY):
    """Integrate a scenario to its horizon (or detected steady state).

    Mirrors the lattice engine's driver: returns an FdRun with one snapshot
    dict per requested step; after an early steady exit the remaining steps
    replicate the converged profile.
    """
    cfg.validate()
    if cfg.n_x < SMOOTH_WINDOW:
        raise ValueError(f"need at least {SMOOTH_WINDOW} nodes for the "
                         f"smoothing window, got {cfg.n_x}")
    if snapshot_steps is None:
        snapshot_steps = default_snapshot_steps(cfg)
    snapshot_steps = sorted(set(int(s) for s in snapshot_steps))
    if snapshot_steps and snapshot_steps[-1] > cfg.n_steps:
        raise ValueError("snapshot step beyond the configured horizon")

    n = cfg.n_x
    use_frozen = (cfg.gamma != 0.0 or cfg.drag_model == "cgw"
                  or cfg.n_gamma > 1)
    y = init_state(cfg).flat()
    frozen = (np.zeros(n), np.zeros(n),
              *closure_terms(state_from_flat(y, n), cfg, 0.0)[2:])
    taps = _gaussian_taps()
    pf, pi = pack_params(cfg)
    cgw = cfg.drag_model == "cgw"

    t = 0.0
    h = 1.0
    accepted = 0
    steady_step = None
    snapshots = []
    t0_wall = time.perf_counter()

    if use_kernel:
        meta = np.array([0.0, 1.0, 0.0, 0.0])
        counters = np.zeros(2, dtype=np.int64)
        cycle_y = np.zeros_like(y)
    else:
        carry = {"accepted": 0, "cycles": 0, "cycle_y": None,
                 "cycle_t": 0.0}

        def hook(_n_acc, t_now, y_now):
            changed = False
            ag = y_now[3 * n:]
            agc = np.clip(ag, 0.0, 1.0)
            if not np.array_equal(agc, ag):
                y_now = y_now.copy()
                y_now[3 * n:] = agc
                changed = True
            carry["accepted"] += 1
            if carry["accepted"] % smooth_every == 0:
                y_now = y_now.copy()
                for b in range(4):
                    y_now[b * n:(b + 1) * n] = gaussian_smooth(
                        y_now[b * n:(b + 1) * n])
                changed = True
                if carry["cycle_y"] is not None:
                    dt = t_now - carry["cycle_t"]
                    dmax = np.abs(y_now - carry["cycle_y"]).max()
                    if dt > 0.0 and dmax < STEADY_RATE_TOL * dt:
                        carry["cycles"] += 1
                    else:
                        carry["cycles"] = 0
                carry["cycle_y"] = y_now.copy()
                carry["cycle_t"] = t_now
                if carry["cycles"] >= STEADY_CYCLES:
                    raise _SteadyStop(t_now, y_now)
            return y_now if changed else None

    for target in snapshot_steps:
        while steady_step is None and t < target:
            if use_frozen:
                k_next = (math.floor(t / cfg.n_gamma) + 1) * cfg.n_gamma
                seg_end = min(float(target), float(k_next))
                if t == math.floor(t / cfg.n_gamma) * cfg.n_gamma:
                    frozen = closure_terms(state_from_flat(y, n), cfg, t)
            else:
                seg_end = float(target)
            if use_kernel:
                status = _advance_fd(y, meta, counters, cycle_y, seg_end,
                                     pf, pi, *frozen, use_frozen, cgw, taps,
                                     RTOL, ATOL, MIN_STEP, smooth_every)
                t = meta[0]
                if status == 1:
                    steady_step = t
                elif status == 2:
                    raise SolverAbort(
                        f"time step {meta[1]:.3e} underflowed below "
                        f"{MIN_STEP:g} at t_hat {t:.6g}")
            else:
                def f(tt, yy, fr=frozen if use_frozen else None):
                    st = state_from_flat(yy, n)
                    d = rhs(st, cfg, tt, frozen=fr)
                    return d.flat()
                try:
                    t, y, h, _ = integrate_ode(f, t, y, seg_end,
                                               first_step=h,
                                               accepted_hook=hook)
                except _SteadyStop as stop:
                    t, y = stop.t, stop.y
                    steady_step = t
        snapshots.append(_snapshot(y, target, cfg, frozen, use_frozen))

    runtime = time.perf_counter() - t0_wall
    accepted = int(counters[0]) if use_kernel else carry["accepted"]
    return FdRun(config=cfg, snapshots=snapshots, runtime_seconds=runtime,
                 steady_step=steady_step,
                 stats={"accepted_steps": accepted})
