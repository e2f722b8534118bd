"""Pure-numpy stepping kernels for batched trajectory simulation.

Each kernel advances a batch of Bloch states by one timestep in place and
writes the sampled readouts to the provided output row.  The arithmetic
below is the exact positive-map update written out in Bloch coordinates
(only +, -, *, / and sqrt), and the expression order is pinned: the
compiled twin in ``_compiled.pyx`` performs the same operations in the
same order so both engines produce bit-identical trajectories.

Scheme constants are packed once per run by :func:`pack_constants`.
"""

import math

import numpy as np

# const tuple layouts (all float64):
#   photodetect: (s, heps)
#   homodyne:    (s, a1, b1, kc, sge, isd, ct, st)   a1 = s2 + ell2, b1 = s2 - ell2
#   heterodyne:  (s, s2, kc, sg2, isd, ct, st)


def pack_constants(scheme: str, gamma: float, dt: float, theta: float, eta: float):
    """Precompute the per-step scalar constants for one scheme."""
    eps = gamma * dt
    s = math.sqrt(1.0 - eps)
    if scheme == "photodetect":
        return (s, 0.5 * eps)
    ct, st = math.cos(theta), math.sin(theta)
    isd = 1.0 / math.sqrt(dt)
    if scheme == "heterodyne":
        sg2 = math.sqrt(gamma / 2.0)
        return (s, 1.0 - eps, dt * sg2, sg2, isd, ct, st)
    # ideal homodyne is the eta = 1 case (lost-port weight ell2 = 0)
    s2 = 1.0 - eps
    ell2 = eps * (1.0 - eta)
    kc = dt * math.sqrt(gamma * eta)
    sge = math.sqrt(eta * gamma)
    return (s, s2 + ell2, s2 - ell2, kc, sge, isd, ct, st)


def rotate(x, y, z, rot):
    """Apply a 3x3 rotation (flattened row-major, length 9) in place."""
    r = rot
    xn = r[0] * x + r[1] * y + r[2] * z
    yn = r[3] * x + r[4] * y + r[5] * z
    zn = r[6] * x + r[7] * y + r[8] * z
    x[:] = xn
    y[:] = yn
    z[:] = zn


def step_photodetect(x, y, z, u, click_out, consts):
    """Bernoulli click draw followed by the conditional update."""
    s, heps = consts
    p1 = heps * (1.0 + z)
    clicked = u < p1
    t = 1.0 - p1
    xn = (s * x) / t
    yn = (s * y) / t
    zn = (z - p1) / t
    x[:] = np.where(clicked, 0.0, xn)
    y[:] = np.where(clicked, 0.0, yn)
    z[:] = np.where(clicked, -1.0, zn)
    click_out[:] = clicked


def step_homodyne(x, y, z, xi, r_out, consts):
    """Homodyne step (ideal or inefficient) with Gaussian readout xi."""
    s, a1, b1, kc, sge, isd, ct, st = consts
    m = ct * x - st * y
    r = sge * m + xi * isd
    kru = kc * r
    kr = kru * ct
    ki = -(kru * st)
    opz = 1.0 + z
    cross = kr * x + ki * y
    k2 = kr * kr + ki * ki
    t = (a1 + k2) * opz * 0.5 + cross + (1.0 - z) * 0.5
    xn = (s * (opz * kr + x)) / t
    yn = (s * (opz * ki + y)) / t
    zn = ((b1 - k2) * opz * 0.5 - cross - (1.0 - z) * 0.5) / t
    x[:] = xn
    y[:] = yn
    z[:] = zn
    r_out[:] = r


def step_heterodyne(x, y, z, xi_i, xi_q, ri_out, rq_out, consts):
    """Heterodyne step with Gaussian quadrature readouts (xi_i, xi_q)."""
    s, s2, kc, sg2, isd, ct, st = consts
    mi = ct * x - st * y
    mq = ct * y + st * x
    ri = sg2 * mi + xi_i * isd
    rq = sg2 * mq + xi_q * isd
    kr = kc * (ri * ct + rq * st)
    ki = kc * (rq * ct - ri * st)
    opz = 1.0 + z
    cross = kr * x + ki * y
    k2 = kr * kr + ki * ki
    t = (s2 + k2) * opz * 0.5 + cross + (1.0 - z) * 0.5
    xn = (s * (opz * kr + x)) / t
    yn = (s * (opz * ki + y)) / t
    zn = ((s2 - k2) * opz * 0.5 - cross - (1.0 - z) * 0.5) / t
    x[:] = xn
    y[:] = yn
    z[:] = zn
    ri_out[:] = ri
    rq_out[:] = rq
