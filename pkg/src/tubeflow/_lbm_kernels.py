"""Fused scalar kernel for the six-scheme update (numba).

Mirrors ``lbm.reference_step`` operation for operation -- same expressions,
same association order -- so both paths agree to rounding noise; the
equivalence is covered by tests.  Four passes per step: (1) Spalding
projection of the stored volume-fraction schemes, then moments, bounds and
the steady-state probe, (2) kinetic sources with dashpot and freezing,
(3) stresses, gradients and force densities, (4) collide-and-stream with the
tube boundary rules.
"""

import math

import numpy as np
from numba import njit

from .lattice import CS2
from .lbm import (ALPHA_FLOOR, SOURCE_LIMIT, STEADY_TOL, STEADY_WINDOW,
                  alpha_relaxation, relaxation_from_viscosity)

STATUS_OK = 0
STATUS_STEADY = 1
STATUS_NAN = 2
STATUS_SOURCE = 3
STATUS_EPS_L = 4
STATUS_ALPHA = 5

(PF_RATIO, PF_G, PF_GAMMA, PF_OM_G, PF_PSI_G, PF_NU_G, PF_OM_L, PF_PSI_L,
 PF_NU_L, PF_OM_A, PF_KI, PF_KW, PF_KAPPA_I, PF_KAPPA_W, PF_A_MIN, PF_A_MAX,
 PF_UG_MIN, PF_UG_MAX, PF_UL_MIN, PF_UL_MAX) = range(20)
(PI_N_RAMP, PI_N_GAMMA, PI_CGW) = range(3)


def pack_params(cfg):
    omega_g, psi_g = relaxation_from_viscosity(cfg.nu_g, cfg.bulk_strategy)
    omega_l, psi_l = relaxation_from_viscosity(cfg.nu_l, cfg.bulk_strategy)
    pf = np.zeros(20)
    pf[PF_RATIO] = cfg.density_ratio
    pf[PF_G] = cfg.g_hat
    pf[PF_GAMMA] = cfg.gamma
    pf[PF_OM_G], pf[PF_PSI_G], pf[PF_NU_G] = omega_g, psi_g, cfg.nu_g
    pf[PF_OM_L], pf[PF_PSI_L], pf[PF_NU_L] = omega_l, psi_l, cfg.nu_l
    pf[PF_OM_A] = alpha_relaxation(cfg.n_x, cfg.chi_alpha)
    pf[PF_KI], pf[PF_KW] = cfg.k_i_hat, cfg.k_w_hat
    pf[PF_KAPPA_I], pf[PF_KAPPA_W] = cfg.kappa_i_hat, cfg.kappa_w_hat
    pf[PF_A_MIN], pf[PF_A_MAX] = cfg.alpha_g_min, cfg.alpha_g_max
    pf[PF_UG_MIN], pf[PF_UG_MAX] = cfg.u_g_min, cfg.u_g_max
    pf[PF_UL_MIN], pf[PF_UL_MAX] = cfg.u_l_min, cfg.u_l_max
    pi = np.array([cfg.n_ramp, cfg.n_gamma,
                   1 if cfg.drag_model == "cgw" else 0], dtype=np.int64)
    return pf, pi


@njit(inline="always")
def _eq_std(alpha, u):
    u2 = u * u
    return (alpha * (2.0 / 3.0 - u2),
            alpha * (1.0 + 3.0 * u + 3.0 * u2) / 6.0,
            alpha * (1.0 - 3.0 * u + 3.0 * u2) / 6.0)


@njit(inline="always")
def _eq_inc(phi, eps, u):
    u2 = u * u
    ep = eps * phi
    return (eps * (3.0 - phi) / 3.0 - u2,
            (ep + 3.0 * u + 3.0 * u2) / 6.0,
            (ep - 3.0 * u + 3.0 * u2) / 6.0)


@njit(inline="always")
def _eq_lin(psi, s, g):
    sp = s * psi
    return (s * (3.0 - psi) / 3.0,
            (sp + 3.0 * g) / 6.0,
            (sp - 3.0 * g) / 6.0)


@njit(cache=True)
def _advance(fg, fl, fag, fal, s2g, s2l, lam, prev, counters, cons,
             pf, pi, step0, n_steps):
    n = fg.shape[0]
    ratio = pf[PF_RATIO]
    g_hat = pf[PF_G]
    gamma = pf[PF_GAMMA]
    om_g, psi_g, nu_g = pf[PF_OM_G], pf[PF_PSI_G], pf[PF_NU_G]
    om_l, psi_l, nu_l = pf[PF_OM_L], pf[PF_PSI_L], pf[PF_NU_L]
    om_a = pf[PF_OM_A]
    k_i0, k_w0 = pf[PF_KI], pf[PF_KW]
    kap_i, kap_w = pf[PF_KAPPA_I], pf[PF_KAPPA_W]
    a_min, a_max = pf[PF_A_MIN], pf[PF_A_MAX]
    ug_min, ug_max = pf[PF_UG_MIN], pf[PF_UG_MAX]
    ul_min, ul_max = pf[PF_UL_MIN], pf[PF_UL_MAX]
    n_ramp = pi[PI_N_RAMP]
    n_gamma = pi[PI_N_GAMMA]
    cgw = pi[PI_CGW] == 1
    oa_cs2 = om_a / CS2

    eg = np.empty(n)
    el = np.empty(n)
    ug = np.empty(n)
    ul = np.empty(n)
    ag = np.empty(n)
    al = np.empty(n)
    agr = np.empty(n)
    alr = np.empty(n)
    upg = np.empty(n)
    upl = np.empty(n)
    phi = np.empty(n)
    cg = np.empty(n)
    cl = np.empty(n)
    gG = np.empty(n)
    gL = np.empty(n)
    fgb = np.empty_like(fg)
    flb = np.empty_like(fl)
    fagb = np.empty_like(fag)
    falb = np.empty_like(fal)
    fga, fla, faga, fala = fg, fl, fag, fal

    status = STATUS_OK
    ev_step = -1
    ev_node = -1
    done = 0
    drift = cons[0]
    proj = cons[1]

    for t in range(step0, step0 + n_steps):
        th = math.tanh(t / n_ramp)
        a_in = (a_max - a_min) * th + a_min
        ug_in = (ug_max - ug_min) * th + ug_min
        ul_in = (ul_max - ul_min) * th + ul_min

        # pass 1: Spalding projection of the stored schemes, moments,
        # bounding, steady probe
        diffmax = 0.0
        for i in range(n):
            a1 = faga[i, 0] + faga[i, 1] + faga[i, 2]
            a2 = fala[i, 0] + fala[i, 1] + fala[i, 2]
            if not (math.isfinite(a1) and math.isfinite(a2)):
                status = STATUS_NAN
                ev_step = t
                ev_node = i
                break
            bg = min(max(a1, 0.0), 1.0)
            bl = min(max(a2, 0.0), 1.0)
            if bg + bl <= 0.0:
                status = STATUS_ALPHA
                ev_step = t
                ev_node = i
                break
            abound = bg / max(bg + bl, ALPHA_FLOOR)
            albound = 1.0 - abound
            rg = abound / a1 if a1 > 0.0 else 0.0
            rl = albound / a2 if a2 > 0.0 else 0.0
            d = abs(abound - a1)
            if d > proj:
                proj = d
            d = abs(albound - a2)
            if d > proj:
                proj = d
            faga[i, 0] = faga[i, 0] * rg
            faga[i, 1] = faga[i, 1] * rg
            faga[i, 2] = faga[i, 2] * rg
            fala[i, 0] = fala[i, 0] * rl
            fala[i, 1] = fala[i, 1] * rl
            fala[i, 2] = fala[i, 2] * rl

            e1 = fga[i, 0] + fga[i, 1] + fga[i, 2]
            u1 = fga[i, 1] - fga[i, 2]
            e2 = fla[i, 0] + fla[i, 1] + fla[i, 2]
            u2 = fla[i, 1] - fla[i, 2]
            a1 = faga[i, 0] + faga[i, 1] + faga[i, 2]
            m1 = faga[i, 1] - faga[i, 2]
            a2 = fala[i, 0] + fala[i, 1] + fala[i, 2]
            m2 = fala[i, 1] - fala[i, 2]
            if not (math.isfinite(e1) and math.isfinite(e2)
                    and math.isfinite(u1) and math.isfinite(u2)
                    and math.isfinite(a1) and math.isfinite(a2)):
                status = STATUS_NAN
                ev_step = t
                ev_node = i
                break
            # blow-up guard on the liquid EOS density: nodal eps_l is a
            # feedback-free ballast field (only phi*eps_l is ever consumed)
            # and may drift through zero benignly, so the guard watches the
            # pinned product instead (see lbm.evaluate_closures).
            if 1.0 + (e1 - 1.0) / ratio <= 0.0:
                status = STATUS_EPS_L
                ev_step = t
                ev_node = i
                break
            bg = min(max(a1, 0.0), 1.0)
            bl = min(max(a2, 0.0), 1.0)
            if bg + bl <= 0.0:
                status = STATUS_ALPHA
                ev_step = t
                ev_node = i
                break
            abound = bg / max(bg + bl, ALPHA_FLOOR)
            eg[i] = e1
            el[i] = e2
            ug[i] = u1
            ul[i] = u2
            agr[i] = a1
            alr[i] = a2
            ag[i] = abound
            al[i] = 1.0 - abound
            upg[i] = m1 / max(a1, ALPHA_FLOOR)
            upl[i] = m2 / max(a2, ALPHA_FLOOR)
            phi[i] = (1.0 + (e1 - 1.0) / ratio) / e2
            cg[i] = (1.0 - abound) * (u1 - u2)
            cl[i] = abound * (u2 - u1)
            d = abs(abound - prev[0, i])
            if d > diffmax:
                diffmax = d
            d = abs(u1 - prev[1, i])
            if d > diffmax:
                diffmax = d
            d = abs(u2 - prev[2, i])
            if d > diffmax:
                diffmax = d
            d = abs(e1 - prev[3, i])
            if d > diffmax:
                diffmax = d
            d = abs(e2 - prev[4, i])
            if d > diffmax:
                diffmax = d
            prev[0, i] = abound
            prev[1, i] = u1
            prev[2, i] = u2
            prev[3, i] = e1
            prev[4, i] = e2
        if status != STATUS_OK:
            break
        if diffmax < STEADY_TOL:
            counters[0] += 1
        else:
            counters[0] = 0
        if counters[0] >= STEADY_WINDOW:
            status = STATUS_STEADY
            ev_step = t
            break

        # pass 2: kinetic sources, dashpot, freezing grid
        refresh = (t % n_gamma) == 0
        for i in range(n):
            a_c = cg[i]
            b_c = cg[i - 1] if i > 0 else 2.0 * cg[0] - cg[1]
            c_c = cg[i + 1] if i < n - 1 else 2.0 * cg[n - 1] - cg[n - 2]
            sg = a_c * a_c - 0.5 * (b_c - c_c) - 0.5 * (b_c * b_c + c_c * c_c)
            a_c = cl[i]
            b_c = cl[i - 1] if i > 0 else 2.0 * cl[0] - cl[1]
            c_c = cl[i + 1] if i < n - 1 else 2.0 * cl[n - 1] - cl[n - 2]
            sl = a_c * a_c - 0.5 * (b_c - c_c) - 0.5 * (b_c * b_c + c_c * c_c)
            if abs(sg) > SOURCE_LIMIT or abs(sl) > SOURCE_LIMIT:
                status = STATUS_SOURCE
                ev_step = t
                ev_node = i
                break
            sgd = sg - gamma * ug[i] * ug[i] * (eg[i] - 1.0)
            sld = sl - gamma * ul[i] * ul[i] * (eg[i] - 1.0) / ratio
            if refresh:
                s2g[i] = sgd
                s2l[i] = sld
                av = ag[i]
                alv = 1.0 - av
                lam[i] = av * alv * (av + alv * ratio)
        if status != STATUS_OK:
            break

        # pass 3: stresses, symmetrized gradients, drag, force densities
        for i in range(n):
            pig = fga[i, 1] + fga[i, 2]
            pieqg = CS2 * eg[i] + ug[i] * ug[i]
            sigg = nu_g * (om_g * (pieqg - pig) + psi_g * CS2 * s2g[i])
            pil = fla[i, 1] + fla[i, 2]
            pieql = CS2 * (1.0 + (eg[i] - 1.0) / ratio) + ul[i] * ul[i]
            sigl = nu_l * (om_l * (pieql - pil) + psi_l * CS2 * s2l[i])
            gg = ag[i] * (oa_cs2 * (ug[i] - upg[i]))
            gl = al[i] * (oa_cs2 * (ul[i] - upl[i]))
            gsym = 0.5 * (gg - gl)
            gg = gsym
            gl = -gsym
            if cgw:
                ki = kap_i * lam[i]
                kw = kap_w * lam[i]
            else:
                ki = k_i0
                kw = k_w0
            agf = max(ag[i], ALPHA_FLOOR)
            alf = max(al[i], ALPHA_FLOOR)
            slip = ul[i] - ug[i]
            gG[i] = (s2g[i] * ug[i] + sigg * gg / agf + (ratio - 1.0) * g_hat
                     + (ki / agf) * abs(slip) * slip)
            gL[i] = (s2l[i] * ul[i] + sigl * gl / alf
                     - (ki / (ratio * alf)) * abs(slip) * slip
                     - (kw / (ratio * alf)) * abs(ul[i]) * ul[i])

        # pass 4: collide and stream with tube boundaries
        st1_g = st1_l = st1_ag = st1_al = 0.0
        st2_g = st2_l = 0.0
        for i in range(n):
            l0, l1, l2 = _eq_lin(psi_g, s2g[i], gG[i])
            e0, e1, e2 = _eq_inc(1.0, eg[i], ug[i])
            s0 = fga[i, 0] + om_g * (e0 - fga[i, 0]) + l0
            s1 = fga[i, 1] + om_g * (e1 - fga[i, 1]) + l1
            s2 = fga[i, 2] + om_g * (e2 - fga[i, 2]) + l2
            fgb[i, 0] = s0
            if i < n - 1:
                fgb[i + 1, 1] = s1
            else:
                st1_g = s1
            if i > 0:
                fgb[i - 1, 2] = s2
            else:
                st2_g = s2

            l0, l1, l2 = _eq_lin(psi_l, s2l[i], gL[i])
            e0, e1, e2 = _eq_inc(phi[i], el[i], ul[i])
            s0 = fla[i, 0] + om_l * (e0 - fla[i, 0]) + l0
            s1 = fla[i, 1] + om_l * (e1 - fla[i, 1]) + l1
            s2 = fla[i, 2] + om_l * (e2 - fla[i, 2]) + l2
            flb[i, 0] = s0
            if i < n - 1:
                flb[i + 1, 1] = s1
            else:
                st1_l = s1
            if i > 0:
                flb[i - 1, 2] = s2
            else:
                st2_l = s2

            e0, e1, e2 = _eq_std(agr[i], ug[i])
            s0 = faga[i, 0] + om_a * (e0 - faga[i, 0])
            s1 = faga[i, 1] + om_a * (e1 - faga[i, 1])
            s2 = faga[i, 2] + om_a * (e2 - faga[i, 2])
            dr = abs((s0 + s1 + s2) - (faga[i, 0] + faga[i, 1] + faga[i, 2]))
            if dr > drift:
                drift = dr
            fagb[i, 0] = s0
            if i < n - 1:
                fagb[i + 1, 1] = s1
            else:
                st1_ag = s1
            if i > 0:
                fagb[i - 1, 2] = s2

            e0, e1, e2 = _eq_std(alr[i], ul[i])
            s0 = fala[i, 0] + om_a * (e0 - fala[i, 0])
            s1 = fala[i, 1] + om_a * (e1 - fala[i, 1])
            s2 = fala[i, 2] + om_a * (e2 - fala[i, 2])
            dr = abs((s0 + s1 + s2) - (fala[i, 0] + fala[i, 1] + fala[i, 2]))
            if dr > drift:
                drift = dr
            falb[i, 0] = s0
            if i < n - 1:
                falb[i + 1, 1] = s1
            else:
                st1_al = s1
            if i > 0:
                falb[i - 1, 2] = s2

        # boundary closures from the pre-update macros
        egb = 1.5 * eg[0] - 0.5 * eg[1]
        elb = 1.5 * el[0] - 0.5 * el[1]
        phib = (1.0 + (egb - 1.0) / ratio) / elb
        e0, e1, e2 = _eq_inc(1.0, egb, ug_in)
        fgb[0, 1] = st2_g + (e1 - e2)
        e0, e1, e2 = _eq_inc(phib, elb, ul_in)
        flb[0, 1] = st2_l + (e1 - e2)
        e0, e1, e2 = _eq_std(a_in, ug_in)
        fagb[0, 1] = e1
        e0, e1, e2 = _eq_std(1.0 - a_in, ul_in)
        falb[0, 1] = e1

        ugo = 1.5 * ug[n - 1] - 0.5 * ug[n - 2]
        ulo = 1.5 * ul[n - 1] - 0.5 * ul[n - 2]
        ago = 1.5 * ag[n - 1] - 0.5 * ag[n - 2]
        alo = 1.5 * al[n - 1] - 0.5 * al[n - 2]
        e0, e1, e2 = _eq_inc(1.0, 1.0, ugo)
        fgb[n - 1, 2] = -st1_g + (e2 + e1)
        phio = (1.0 + (1.0 - 1.0) / ratio) / 1.0
        e0, e1, e2 = _eq_inc(phio, 1.0, ulo)
        flb[n - 1, 2] = -st1_l + (e2 + e1)
        e0, e1, e2 = _eq_std(ago, ugo)
        fagb[n - 1, 2] = -st1_ag + (e2 + e1)
        e0, e1, e2 = _eq_std(alo, ulo)
        falb[n - 1, 2] = -st1_al + (e2 + e1)

        fga, fgb = fgb, fga
        fla, flb = flb, fla
        faga, fagb = fagb, faga
        fala, falb = falb, fala
        done += 1

    if done % 2 == 1:          # latest state lives in the scratch buffers
        fgb[:, :] = fga
        flb[:, :] = fla
        fagb[:, :] = faga
        falb[:, :] = fala
    cons[0] = drift
    cons[1] = proj
    return status, ev_step, ev_node, done


def advance_state(state, pf, pi, target):
    """Drive the kernel from state.step up to ``target`` lattice steps."""
    n_steps = int(target) - state.step
    counters = np.array([state.steady_count], dtype=np.int64)
    cons = np.array([state.cons_drift, state.proj_drift])
    status, ev_step, ev_node, done = _advance(
        state.f_g, state.f_l, state.f_ag, state.f_al,
        state.s_frozen_g, state.s_frozen_l, state.lam_frozen,
        state.prev_macros, counters, cons, pf, pi, state.step, n_steps)
    state.step += done
    state.steady_count = int(counters[0])
    state.cons_drift = float(cons[0])
    state.proj_drift = float(cons[1])
    return status, ev_step, ev_node, done
