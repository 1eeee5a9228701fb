# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) stepper; mirrors ``_dopri_py`` step for step."""

from libc.math cimport sqrt, fabs, sin, cos, pow, isfinite

import numpy as np

from dampho import _dopri_py

FLOW_XV = _dopri_py.FLOW_XV
FLOW_AA = _dopri_py.FLOW_AA
KernelStepFailure = _dopri_py.KernelStepFailure

BACKEND = "cython"

cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 5.0
cdef long MAX_STEPS = 10000000


cdef inline void rhs(int flow, double w, double wa, double p, double q,
                     double *fp, double *fq) noexcept nogil:
    cdef double s
    if flow == 0:
        fp[0] = q
        fq[0] = -(w * w) * p - 2.0 * wa * q
    else:
        s = sin(p)
        fp[0] = -(w + 2.0 * wa * s * cos(p))
        fq[0] = -4.0 * wa * q * s * s


cdef inline double _norm(double e0, double e1, double y0, double y1,
                         double n0, double n1, double rtol,
                         double atol0, double atol1) noexcept nogil:
    cdef double s0 = atol0 + rtol * max(fabs(y0), fabs(n0))
    cdef double s1 = atol1 + rtol * max(fabs(y1), fabs(n1))
    return sqrt(0.5 * ((e0 / s0) * (e0 / s0) + (e1 / s1) * (e1 / s1)))


def integrate(flow, y0, t_out, double w, double wa, double rtol,
              double atol0, double atol1, double max_step):
    if callable(flow):
        return _dopri_py.integrate(flow, y0, t_out, w, wa, rtol, atol0, atol1, max_step)
    if flow not in (FLOW_XV, FLOW_AA):
        raise ValueError(f"unknown flow code {flow!r}")
    cdef int fl = flow
    cdef double[::1] tout = np.ascontiguousarray(t_out, dtype=np.float64)
    cdef Py_ssize_t n_out = tout.shape[0]
    cdef double t = tout[0]
    cdef double t_end = tout[n_out - 1]
    cdef double a = float(y0[0]), b = float(y0[1])
    cdef double fa, fb, ga, gb
    rhs(fl, w, wa, a, b, &fa, &fb)
    cdef long nfev = 1, nrej = 0

    cdef Py_ssize_t cap = 1024, n = 1
    steps_t = np.empty(cap)
    steps_y = np.empty((cap, 2))
    steps_f = np.empty((cap, 2))
    cdef double[::1] st = steps_t
    cdef double[:, ::1] sy = steps_y
    cdef double[:, ::1] sf = steps_f
    st[0] = t
    sy[0, 0] = a
    sy[0, 1] = b
    sf[0, 0] = fa
    sf[0, 1] = fb
    out_arr = np.empty((n_out, 2))
    cdef double[:, ::1] out = out_arr
    out[0, 0] = a
    out[0, 1] = b
    cdef Py_ssize_t k_out = 1

    cdef double sa = atol0 + rtol * fabs(a)
    cdef double sb = atol1 + rtol * fabs(b)
    cdef double d0 = sqrt(0.5 * ((a / sa) * (a / sa) + (b / sb) * (b / sb)))
    cdef double d1 = sqrt(0.5 * ((fa / sa) * (fa / sa) + (fb / sb) * (fb / sb)))
    cdef double h0, h1, d2, h
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, t_end - t)
    rhs(fl, w, wa, a + h0 * fa, b + h0 * fb, &ga, &gb)
    nfev += 1
    d2 = sqrt(0.5 * (((ga - fa) / sa) * ((ga - fa) / sa)
                     + ((gb - fb) / sb) * ((gb - fb) / sb))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = pow(0.01 / max(d1, d2), 0.2)
    h = min(min(100.0 * h0, h1), max_step)

    cdef long steps = 0
    cdef double target, hs, err, fac
    cdef bint clipped
    cdef double k2a, k2b, k3a, k3b, k4a, k4b, k5a, k5b, k6a, k6b, k7a, k7b
    cdef double na, nb, ea, eb

    while k_out < n_out:
        if steps > MAX_STEPS:
            raise KernelStepFailure("maximum number of steps exceeded")
        target = tout[k_out]
        hs = h
        clipped = False
        if t + hs >= target:
            hs = target - t
            clipped = True
        if hs <= 1e-14 * max(1.0, fabs(t)):
            raise KernelStepFailure(f"step size underflow at t = {t!r}")

        rhs(fl, w, wa, a + hs * A21 * fa, b + hs * A21 * fb, &k2a, &k2b)
        rhs(fl, w, wa, a + hs * (A31 * fa + A32 * k2a),
            b + hs * (A31 * fb + A32 * k2b), &k3a, &k3b)
        rhs(fl, w, wa, a + hs * (A41 * fa + A42 * k2a + A43 * k3a),
            b + hs * (A41 * fb + A42 * k2b + A43 * k3b), &k4a, &k4b)
        rhs(fl, w, wa, a + hs * (A51 * fa + A52 * k2a + A53 * k3a + A54 * k4a),
            b + hs * (A51 * fb + A52 * k2b + A53 * k3b + A54 * k4b), &k5a, &k5b)
        rhs(fl, w, wa,
            a + hs * (A61 * fa + A62 * k2a + A63 * k3a + A64 * k4a + A65 * k5a),
            b + hs * (A61 * fb + A62 * k2b + A63 * k3b + A64 * k4b + A65 * k5b),
            &k6a, &k6b)
        na = a + hs * (B1 * fa + B3 * k3a + B4 * k4a + B5 * k5a + B6 * k6a)
        nb = b + hs * (B1 * fb + B3 * k3b + B4 * k4b + B5 * k5b + B6 * k6b)
        rhs(fl, w, wa, na, nb, &k7a, &k7b)
        nfev += 6
        ea = hs * (E1 * fa + E3 * k3a + E4 * k4a + E5 * k5a + E6 * k6a + E7 * k7a)
        eb = hs * (E1 * fb + E3 * k3b + E4 * k4b + E5 * k5b + E6 * k6b + E7 * k7b)
        err = _norm(ea, eb, a, b, na, nb, rtol, atol0, atol1)
        if not isfinite(err):
            raise KernelStepFailure(f"non-finite error estimate at t = {t!r}")

        if err <= 1.0:
            if clipped:
                t = target
            else:
                t = t + hs
            a = na
            b = nb
            fa = k7a
            fb = k7b
            if n == cap:
                cap *= 2
                steps_t = np.resize(steps_t, cap)
                steps_y = np.resize(steps_y, (cap, 2))
                steps_f = np.resize(steps_f, (cap, 2))
                st = steps_t
                sy = steps_y
                sf = steps_f
            st[n] = t
            sy[n, 0] = a
            sy[n, 1] = b
            sf[n, 0] = fa
            sf[n, 1] = fb
            n += 1
            if clipped:
                out[k_out, 0] = a
                out[k_out, 1] = b
                k_out += 1
            if err == 0.0:
                fac = MAX_FACTOR
            else:
                fac = min(MAX_FACTOR, SAFETY * pow(err, -0.2))
            if clipped:
                h = max(h, hs * fac)
            else:
                h = hs * fac
            h = min(h, max_step)
            steps += 1
        else:
            h = hs * max(MIN_FACTOR, SAFETY * pow(err, -0.2))
            nrej += 1

    return (steps_t[:n].copy(), steps_y[:n].copy(), steps_f[:n].copy(),
            out_arr, nfev, nrej)
