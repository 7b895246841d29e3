"""D1Q3 lattice: velocity set, weights, equilibria and moments.

The three-velocity lattice uses v = (0, +1, -1) in lattice units with weights
(2/3, 1/6, 1/6) and lattice sound speed c_s^2 = 1/3.  Everything downstream
(both hydrodynamic schemes, the two volume-fraction schemes and the two
source-sampling schemes) is built from three closed-form equilibrium families:

* standard          f_eq(alpha, u)     -- advected-scalar / weakly compressible
* incompressible    f_eq(phi, eps, u)  -- artificial-compressibility hydrodynamics
                                          with a generalized (phi-scaled) EOS
* linearized        f_eq(psi, S, G)    -- forcing operator carrying a mass source
                                          S and a body force G

All functions broadcast over leading axes; the lattice direction is always the
last axis, ordered (rest, +1, -1).
"""

import numpy as np

VELOCITIES = np.array([0.0, 1.0, -1.0])
WEIGHTS = np.array([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0])
CS2 = 1.0 / 3.0  # lattice sound speed squared


def equilibrium_standard(alpha, u_hat):
    """Standard second-order equilibrium of an advected scalar field.

    Moments: sum f = alpha, sum v f = alpha*u_hat,
    sum v^2 f = alpha*(CS2 + u_hat^2).
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    u_hat = np.asarray(u_hat, dtype=np.float64)
    u2 = u_hat * u_hat
    return np.stack(
        [
            alpha * (2.0 / 3.0 - u2),
            alpha * (1.0 + 3.0 * u_hat + 3.0 * u2) / 6.0,
            alpha * (1.0 - 3.0 * u_hat + 3.0 * u2) / 6.0,
        ],
        axis=-1,
    )


def equilibrium_incompressible(phi, eps_hat, u_hat):
    """Incompressible-family equilibrium with generalized EOS factor phi.

    The rest fraction absorbs the pseudo-density so that the first moment is
    the velocity itself (independent of eps_hat):

    Moments: sum f = eps_hat, sum v f = u_hat,
    sum v^2 f = phi*CS2*eps_hat + u_hat^2.

    phi = 1 recovers the plain artificial-compressibility equilibrium; the
    liquid phase uses phi = (1 + (eps_g - 1)/R)/eps_l so that its pressure
    gradient is 1/R times the gas one.
    """
    phi = np.asarray(phi, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    u_hat = np.asarray(u_hat, dtype=np.float64)
    u2 = u_hat * u_hat
    ep = eps_hat * phi
    return np.stack(
        [
            eps_hat * (3.0 - phi) / 3.0 - u2,
            (ep + 3.0 * u_hat + 3.0 * u2) / 6.0,
            (ep - 3.0 * u_hat + 3.0 * u2) / 6.0,
        ],
        axis=-1,
    )


def equilibrium_linearized(psi, source_hat, force_hat):
    """Linearized equilibrium used as the collision-step forcing operator.

    Moments: sum f = source_hat, sum v f = force_hat,
    sum v^2 f = psi*CS2*source_hat.

    psi tunes the second moment of the forcing (psi = 0 under the D1Smooth
    bulk-viscosity strategy, psi = 2*omega*nu/CS2 under D1Consistent).
    """
    psi = np.asarray(psi, dtype=np.float64)
    source_hat = np.asarray(source_hat, dtype=np.float64)
    force_hat = np.asarray(force_hat, dtype=np.float64)
    sp = source_hat * psi
    return np.stack(
        [
            source_hat * (3.0 - psi) / 3.0,
            (sp + 3.0 * force_hat) / 6.0,
            (sp - 3.0 * force_hat) / 6.0,
        ],
        axis=-1,
    )


def moments(f):
    """Zeroth, first and second velocity moment of distributions f(..., 3)."""
    f = np.asarray(f)
    m0 = f[..., 0] + f[..., 1] + f[..., 2]
    m1 = f[..., 1] - f[..., 2]
    m2 = f[..., 1] + f[..., 2]
    return m0, m1, m2
