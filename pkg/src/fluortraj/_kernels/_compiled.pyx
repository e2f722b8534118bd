# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of fluortraj._kernels.pure.

Scalar loops over the trajectory batch, performing the exact same IEEE
double operations in the exact same order as the numpy kernels (compiled
with -ffp-contract=off so no FMA fusion changes the rounding).  Keep the
expression trees in sync with pure.py.
"""

import numpy as np

cimport numpy as cnp


def rotate(double[::1] x, double[::1] y, double[::1] z, double[::1] rot):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double r0 = rot[0], r1 = rot[1], r2 = rot[2]
    cdef double r3 = rot[3], r4 = rot[4], r5 = rot[5]
    cdef double r6 = rot[6], r7 = rot[7], r8 = rot[8]
    cdef double xn, yn, zn
    for i in range(n):
        xn = r0 * x[i] + r1 * y[i] + r2 * z[i]
        yn = r3 * x[i] + r4 * y[i] + r5 * z[i]
        zn = r6 * x[i] + r7 * y[i] + r8 * z[i]
        x[i] = xn
        y[i] = yn
        z[i] = zn


def step_photodetect(double[::1] x, double[::1] y, double[::1] z,
                     double[::1] u, cnp.uint8_t[::1] click_out, consts):
    cdef double s = consts[0], heps = consts[1]
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double p1, t
    for i in range(n):
        p1 = heps * (1.0 + z[i])
        if u[i] < p1:
            x[i] = 0.0
            y[i] = 0.0
            z[i] = -1.0
            click_out[i] = 1
        else:
            t = 1.0 - p1
            x[i] = (s * x[i]) / t
            y[i] = (s * y[i]) / t
            z[i] = (z[i] - p1) / t
            click_out[i] = 0


def step_homodyne(double[::1] x, double[::1] y, double[::1] z,
                  double[::1] xi, double[::1] r_out, consts):
    cdef double s = consts[0], a1 = consts[1], b1 = consts[2], kc = consts[3]
    cdef double sge = consts[4], isd = consts[5], ct = consts[6], st = consts[7]
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double m, r, kru, kr, ki, opz, cross, k2, t, xn, yn, zn
    for i in range(n):
        m = ct * x[i] - st * y[i]
        r = sge * m + xi[i] * isd
        kru = kc * r
        kr = kru * ct
        ki = -(kru * st)
        opz = 1.0 + z[i]
        cross = kr * x[i] + ki * y[i]
        k2 = kr * kr + ki * ki
        t = ((a1 + k2) * opz) * 0.5 + cross + ((1.0 - z[i]) * 0.5)
        xn = (s * (opz * kr + x[i])) / t
        yn = (s * (opz * ki + y[i])) / t
        zn = (((b1 - k2) * opz) * 0.5 - cross - ((1.0 - z[i]) * 0.5)) / t
        x[i] = xn
        y[i] = yn
        z[i] = zn
        r_out[i] = r


def step_heterodyne(double[::1] x, double[::1] y, double[::1] z,
                    double[::1] xi_i, double[::1] xi_q,
                    double[::1] ri_out, double[::1] rq_out, consts):
    cdef double s = consts[0], s2 = consts[1], kc = consts[2]
    cdef double sg2 = consts[3], isd = consts[4], ct = consts[5], st = consts[6]
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double mi, mq, ri, rq, kr, ki, opz, cross, k2, t, xn, yn, zn
    for i in range(n):
        mi = ct * x[i] - st * y[i]
        mq = ct * y[i] + st * x[i]
        ri = sg2 * mi + xi_i[i] * isd
        rq = sg2 * mq + xi_q[i] * isd
        kr = kc * (ri * ct + rq * st)
        ki = kc * (rq * ct - ri * st)
        opz = 1.0 + z[i]
        cross = kr * x[i] + ki * y[i]
        k2 = kr * kr + ki * ki
        t = ((s2 + k2) * opz) * 0.5 + cross + ((1.0 - z[i]) * 0.5)
        xn = (s * (opz * kr + x[i])) / t
        yn = (s * (opz * ki + y[i])) / t
        zn = (((s2 - k2) * opz) * 0.5 - cross - ((1.0 - z[i]) * 0.5)) / t
        x[i] = xn
        y[i] = yn
        z[i] = zn
        ri_out[i] = ri
        rq_out[i] = rq
