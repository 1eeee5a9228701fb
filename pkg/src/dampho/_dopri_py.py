"""Pure-Python Dormand-Prince 5(4) stepper for two-dimensional flows.

Reference implementation and fallback for the compiled ``_dopri`` module; the
two must stay operation-for-operation identical.

Flows are selected by integer code so the compiled kernel can inline them:

* ``FLOW_XV`` (0):  ``x' = v, v' = -w^2 x - 2 wa v``
* ``FLOW_AA`` (1):  ``phi' = -(w + wa sin 2phi), J' = -4 wa J sin^2 phi``

A Python callable ``rhs(y0, y1) -> (f0, f1)`` may be passed instead of a code.
"""

import math

import numpy as np

FLOW_XV = 0
FLOW_AA = 1

A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
MAX_STEPS = 10_000_000

BACKEND = "python"


class KernelStepFailure(ArithmeticError):
    pass


def _make_rhs(flow, w, wa):
    if callable(flow):
        return flow
    w2 = w * w
    if flow == FLOW_XV:
        def rhs(x, v):
            return v, -w2 * x - 2.0 * wa * v
    elif flow == FLOW_AA:
        def rhs(phi, j):
            s = math.sin(phi)
            return -(w + 2.0 * wa * s * math.cos(phi)), -4.0 * wa * j * s * s
    else:
        raise ValueError(f"unknown flow code {flow!r}")
    return rhs


def _norm(e0, e1, y0, y1, n0, n1, rtol, atol0, atol1):
    s0 = atol0 + rtol * max(abs(y0), abs(n0))
    s1 = atol1 + rtol * max(abs(y1), abs(n1))
    return math.sqrt(0.5 * ((e0 / s0) ** 2 + (e1 / s1) ** 2))


def integrate(flow, y0, t_out, w, wa, rtol, atol0, atol1, max_step):
    """Integrate from ``t_out[0]`` to ``t_out[-1]``, landing exactly on each ``t_out``.

    Returns ``(ts, ys, fs, y_out, nfev, nrej)`` where ``ts``/``ys``/``fs`` hold
    every accepted step endpoint with its state and derivative (for Hermite
    dense output) and ``y_out`` the states at ``t_out``.
    """
    rhs = _make_rhs(flow, w, wa)
    t_out = [float(t) for t in t_out]
    n_out = len(t_out)
    t = t_out[0]
    t_end = t_out[-1]
    a, b = float(y0[0]), float(y0[1])
    fa, fb = rhs(a, b)
    nfev = 1
    nrej = 0

    ts = [t]
    ya = [a]
    yb = [b]
    fas = [fa]
    fbs = [fb]
    out = [(a, b)]
    k_out = 1

    # initial step (Hairer, Norsett & Wanner, II.4)
    sa = atol0 + rtol * abs(a)
    sb = atol1 + rtol * abs(b)
    d0 = math.sqrt(0.5 * ((a / sa) ** 2 + (b / sb) ** 2))
    d1 = math.sqrt(0.5 * ((fa / sa) ** 2 + (fb / sb) ** 2))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t_end - t)
    ga, gb = rhs(a + h0 * fa, b + h0 * fb)
    nfev += 1
    d2 = math.sqrt(0.5 * (((ga - fa) / sa) ** 2 + ((gb - fb) / sb) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100.0 * h0, h1, max_step)

    steps = 0
    while k_out < n_out:
        if steps > MAX_STEPS:
            raise KernelStepFailure("maximum number of steps exceeded")
        target = t_out[k_out]
        hs = h
        clipped = False
        if t + hs >= target:
            hs = target - t
            clipped = True
        if hs <= 1e-14 * max(1.0, abs(t)):
            raise KernelStepFailure(f"step size underflow at t = {t!r}")

        k2a, k2b = rhs(a + hs * A21 * fa, b + hs * A21 * fb)
        k3a, k3b = rhs(a + hs * (A31 * fa + A32 * k2a),
                       b + hs * (A31 * fb + A32 * k2b))
        k4a, k4b = rhs(a + hs * (A41 * fa + A42 * k2a + A43 * k3a),
                       b + hs * (A41 * fb + A42 * k2b + A43 * k3b))
        k5a, k5b = rhs(a + hs * (A51 * fa + A52 * k2a + A53 * k3a + A54 * k4a),
                       b + hs * (A51 * fb + A52 * k2b + A53 * k3b + A54 * k4b))
        k6a, k6b = rhs(a + hs * (A61 * fa + A62 * k2a + A63 * k3a + A64 * k4a + A65 * k5a),
                       b + hs * (A61 * fb + A62 * k2b + A63 * k3b + A64 * k4b + A65 * k5b))
        na = a + hs * (B1 * fa + B3 * k3a + B4 * k4a + B5 * k5a + B6 * k6a)
        nb = b + hs * (B1 * fb + B3 * k3b + B4 * k4b + B5 * k5b + B6 * k6b)
        k7a, k7b = rhs(na, nb)
        nfev += 6
        ea = hs * (E1 * fa + E3 * k3a + E4 * k4a + E5 * k5a + E6 * k6a + E7 * k7a)
        eb = hs * (E1 * fb + E3 * k3b + E4 * k4b + E5 * k5b + E6 * k6b + E7 * k7b)
        err = _norm(ea, eb, a, b, na, nb, rtol, atol0, atol1)
        if not math.isfinite(err):
            raise KernelStepFailure(f"non-finite error estimate at t = {t!r}")

        if err <= 1.0:
            t = target if clipped else t + hs
            a, b, fa, fb = na, nb, k7a, k7b
            ts.append(t)
            ya.append(a)
            yb.append(b)
            fas.append(fa)
            fbs.append(fb)
            if clipped:
                out.append((a, b))
                k_out += 1
            fac = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, SAFETY * err ** -0.2)
            # a clipped step does not shrink the running proposal
            h = max(h, hs * fac) if clipped else hs * fac
            h = min(h, max_step)
            steps += 1
        else:
            h = hs * max(MIN_FACTOR, SAFETY * err ** -0.2)
            nrej += 1

    ts = np.array(ts)
    ys = np.column_stack([ya, yb])
    fs = np.column_stack([fas, fbs])
    return ts, ys, fs, np.array(out), nfev, nrej
