"""Integration of the damped flow in (x, v) and (phi, J) with crossing bookkeeping.

Trajectories are sampled on a fixed time grid; the adaptive stepper lands on
every grid point, and each accepted step is kept for cubic Hermite dense output,
which is what the ``v = 0`` crossing search runs on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._dopri_py import FLOW_AA, FLOW_XV, KernelStepFailure
from .errors import PoleAt, SegmentSpansCrossing, StepFailure
from .model import (
    ActionAngleState,
    DampingRegime,
    OscillatorParams,
    PhaseState,
    classify_regime,
    damped_frequency,
    k_general_values,
)

CROSSING_TOL = 1e-12


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float | tuple = 1e-12
    max_step: float = math.inf
    dense_output_dt: float = 0.05

    def __post_init__(self):
        atol = self.abs_tols
        if self.rel_tol <= 0 or min(atol) <= 0:
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if not self.dense_output_dt > 0:
            raise ValueError("dense_output_dt must be positive")

    @property
    def abs_tols(self):
        if np.ndim(self.abs_tol) == 0:
            return (float(self.abs_tol),) * 2
        a0, a1 = self.abs_tol
        return float(a0), float(a1)


@dataclass(frozen=True)
class CrossingEvent:
    """A passage through ``v = 0``.

    ``k_before`` and ``k_after`` are the general constant at the endpoints of
    the accepted integrator step that contains the crossing.
    """

    t_cross: float
    side: int
    k_before: float
    k_after: float

    @property
    def ratio(self):
        return self.k_after / self.k_before


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-ordered samples of one integration.

    ``y`` holds ``(x, v)`` when ``coords == "xv"`` and ``(phi, J)`` when
    ``coords == "aa"``.  ``k`` is the general constant of motion at each sample
    and ``branch`` counts the ``v = 0`` crossings before it.
    """

    t: np.ndarray
    y: np.ndarray
    k: np.ndarray
    branch: np.ndarray
    crossings: tuple
    coords: str
    params: OscillatorParams
    step_t: np.ndarray = field(repr=False)
    step_y: np.ndarray = field(repr=False)
    step_f: np.ndarray = field(repr=False)
    nfev: int = 0
    backend: str = ""

    def __len__(self):
        return len(self.t)

    @property
    def samples(self):
        make = PhaseState if self.coords == "xv" else ActionAngleState
        return [(float(t), make(float(a), float(b)), float(k), int(br))
                for t, (a, b), k, br in zip(self.t, self.y, self.k, self.branch)]

    def phase_xv(self):
        """Samples as ``(x, v)`` arrays whatever the integration coordinates."""
        if self.coords == "xv":
            return self.y[:, 0], self.y[:, 1]
        return _aa_to_xv(self.y[:, 0], self.y[:, 1], self.params)

    def segments(self):
        """``(start, stop)`` index ranges of samples sharing one branch index."""
        if len(self.branch) == 0:
            return []
        cuts = np.flatnonzero(np.diff(self.branch)) + 1
        bounds = np.concatenate([[0], cuts, [len(self.branch)]])
        return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def dense(self, t):
        """Cubic Hermite interpolant of the state at time(s) ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.step_t, t, side="right") - 1,
                      0, len(self.step_t) - 2)
        return _hermite(t, self.step_t[idx], self.step_t[idx + 1],
                        self.step_y[idx], self.step_y[idx + 1],
                        self.step_f[idx], self.step_f[idx + 1])


def _hermite(t, t0, t1, y0, y1, f0, f1):
    h = np.asarray(t1 - t0, dtype=float)
    s = np.asarray((t - t0) / h)
    s2, s3 = s * s, s * s * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    if np.ndim(y0) > np.ndim(s):
        h00, h10, h01, h11, h = (c[..., None] for c in (h00, h10, h01, h11, h))
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _aa_to_xv(phi, j, params):
    m, w = params.mass, params.omega
    return (np.sqrt(2.0 * j / (m * w)) * np.cos(phi),
            np.sqrt(2.0 * w * j / m) * np.sin(phi))


def _time_grid(t_span, dt):
    t0, t1 = (float(t) for t in t_span)
    if not t1 > t0:
        raise ValueError(f"t_span must be increasing, got {t_span!r}")
    n = int(math.floor((t1 - t0) / dt + 1e-9))
    grid = t0 + dt * np.arange(n + 1)
    if t1 - grid[-1] > 1e-9 * dt:
        grid = np.append(grid, t1)
    else:
        grid[-1] = t1
    return grid


def _run(flow, y0, params, t_span, config, backend):
    config = config or IntegratorConfig()
    kernel = _backend.kernel if backend is None else _backend.get(backend)
    grid = _time_grid(t_span, config.dense_output_dt)
    atol0, atol1 = config.abs_tols
    max_step = config.max_step
    if classify_regime(params) is DampingRegime.UNDERDAMPED:
        # at most one v = 0 crossing per accepted step
        max_step = min(max_step, 0.25 * math.pi / damped_frequency(params))
    try:
        st, sy, sf, out, nfev, _ = kernel.integrate(
            flow, y0, grid, params.omega, params.omega_alpha,
            config.rel_tol, atol0, atol1, max_step)
    except KernelStepFailure as exc:
        raise StepFailure(str(exc)) from exc
    return grid, out, st, sy, sf, nfev, kernel.BACKEND


def _locate(monitor, t0, t1, y0, y1, f0, f1):
    """Bisect the Hermite interpolant for the sign change of ``monitor``."""
    g0 = monitor(y0)
    pre = np.sign(g0)
    lo, hi = t0, t1
    while hi - lo > CROSSING_TOL:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        gm = monitor(_hermite(mid, t0, t1, y0, y1, f0, f1))
        if np.sign(gm) == pre:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _crossings(coords, params, st, sy, sf):
    if coords == "xv":
        g = sy[:, 1]
        monitor = lambda y: y[1]  # noqa: E731
        side_of = lambda y: y[0]  # noqa: E731
        x, v = sy[:, 0], sy[:, 1]
    else:
        g = np.sin(sy[:, 0])
        monitor = lambda y: math.sin(y[0])  # noqa: E731
        side_of = lambda y: math.cos(y[0])  # noqa: E731
        x, v = _aa_to_xv(sy[:, 0], sy[:, 1], params)
    signs = np.sign(g)
    # a zero belongs to the half plane the trajectory enters next
    for i in range(len(signs) - 2, -1, -1):
        if signs[i] == 0:
            signs[i] = signs[i + 1]
    idx = np.flatnonzero(signs[:-1] * signs[1:] < 0)
    if len(idx) == 0:
        return ()
    k_steps = k_general_values(x, v, params, zero_side=-1)
    events = []
    for i in idx:
        tc = _locate(monitor, st[i], st[i + 1], sy[i], sy[i + 1], sf[i], sf[i + 1])
        yc = _hermite(tc, st[i], st[i + 1], sy[i], sy[i + 1], sf[i], sf[i + 1])
        events.append(CrossingEvent(float(tc), int(np.sign(side_of(yc))),
                                    float(k_steps[i]), float(k_steps[i + 1])))
    return tuple(events)


def _assemble(coords, params, grid, out, st, sy, sf, nfev, backend):
    crossings = _crossings(coords, params, st, sy, sf)
    if coords == "xv":
        x, v = out[:, 0], out[:, 1]
    else:
        x, v = _aa_to_xv(out[:, 0], out[:, 1], params)
    k = k_general_values(x, v, params, zero_side=-1)
    t_cross = np.array([c.t_cross for c in crossings])
    branch = np.searchsorted(t_cross, grid, side="right")
    return Trajectory(grid, out, k, branch, crossings, coords, params,
                      st, sy, sf, nfev, backend)


def xv_rhs(params):
    """Right-hand side ``(x, v) -> (x', v')`` as a Python callable."""
    w2, wa = params.omega**2, params.omega_alpha

    def rhs(x, v):
        return v, -w2 * x - 2.0 * wa * v
    return rhs


def action_angle_rhs(params):
    """Right-hand side ``(phi, J) -> (phi', J')``.

    ``2 wa tan(phi) / (1 + tan(phi)^2)`` is written as ``wa sin(2 phi)``,
    which has no poles.
    """
    w, wa = params.omega, params.omega_alpha

    def rhs(phi, j):
        s = math.sin(phi)
        return -(w + 2.0 * wa * s * math.cos(phi)), -4.0 * wa * j * s * s
    return rhs


def integrate_xv(initial: PhaseState, params: OscillatorParams, t_span,
                 config: IntegratorConfig | None = None, *, rhs=None,
                 backend=None) -> Trajectory:
    """Integrate ``x' = v, v' = -w^2 x - 2 wa v`` over ``t_span``.

    ``rhs`` optionally replaces the built-in flow with a Python callable
    ``(x, v) -> (x', v')``, which always runs on the pure-Python kernel.
    """
    flow = FLOW_XV if rhs is None else rhs
    res = _run(flow, (initial.x, initial.v), params, t_span, config, backend)
    return _assemble("xv", params, *res)


def integrate_action_angle(initial: ActionAngleState, params: OscillatorParams,
                           t_span, config: IntegratorConfig | None = None, *,
                           rhs=None, backend=None) -> Trajectory:
    """Integrate the flow in action-angle form; ``phi`` is left unwrapped."""
    if not initial.j > 0:
        raise ValueError("initial action must be positive")
    flow = FLOW_AA if rhs is None else rhs
    res = _run(flow, (initial.phi, initial.j), params, t_span, config, backend)
    return _assemble("aa", params, *res)


def invariance_drift(traj: Trajectory, segment) -> float:
    """Max relative change of the general constant over a crossing-free segment."""
    start, stop = (segment.start, segment.stop) if isinstance(segment, slice) else segment
    start = 0 if start is None else start
    stop = len(traj) if stop is None else stop
    br = traj.branch[start:stop]
    if len(br) == 0:
        raise ValueError("empty segment")
    if br.min() != br.max():
        raise SegmentSpansCrossing(f"samples {start}:{stop} span a v = 0 crossing")
    k = traj.k[start:stop]
    return float(np.max(np.abs(k - k[0])) / abs(k[0]))


def predicted_jump_ratio(params: OscillatorParams) -> float:
    """``K_after / K_before`` at a forward-time ``v = 0`` crossing (underdamped)."""
    return math.exp(-2.0 * math.pi * params.omega_alpha / damped_frequency(params))


# -- closed-form solutions -------------------------------------------------------

def _pole_check(theta):
    if abs(math.cos(theta)) < 1e-12:
        raise PoleAt(f"tan has a pole at {theta!r}")


def analytic_phi(t, a, params: OscillatorParams) -> float:
    """``-arctan(tan(w t + a) - wa / w)`` as usually quoted for the angle."""
    theta = params.omega * t + a
    _pole_check(theta)
    return -math.atan(math.tan(theta) - params.omega_alpha / params.omega)


def phase_constant(phi0, params: OscillatorParams) -> float:
    """Phase ``a`` with ``analytic_phi(0, a) == phi0`` (mod pi)."""
    _pole_check(phi0)
    return math.atan(params.omega_alpha / params.omega - math.tan(phi0))


def analytic_j(t, j0, params: OscillatorParams) -> float:
    """``J0 exp(-wa f(t))`` with ``f = 4 (tan w t - r)^2 t / (1 + (tan w t - r)^2)``."""
    theta = params.omega * t
    _pole_check(theta)
    q = math.tan(theta) - params.omega_alpha / params.omega
    f = 4.0 * q * q * t / (1.0 + q * q)
    return j0 * math.exp(-params.omega_alpha * f)


def analytic_deviation(traj: Trajectory, a, j0, pole_margin=1e-3):
    """Compare the closed-form ``phi(t)``, ``J(t)`` with an action-angle trajectory.

    Angles are compared modulo pi (the closed form returns a principal arctan).
    Samples within ``pole_margin`` of a tangent pole are skipped.  Returns a
    dict with the max angle and relative action deviations and their curves.
    """
    if traj.coords != "aa":
        raise ValueError("needs an action-angle trajectory")
    p = traj.params
    dphi, dj, used = [], [], []
    for i, t in enumerate(traj.t):
        if (abs(math.cos(p.omega * t + a)) < pole_margin
                or abs(math.cos(p.omega * t)) < pole_margin):
            continue
        d = analytic_phi(t, a, p) - traj.y[i, 0]
        dphi.append((d + 0.5 * math.pi) % math.pi - 0.5 * math.pi)
        dj.append(analytic_j(t, j0, p) / traj.y[i, 1] - 1.0)
        used.append(t)
    dphi, dj = np.abs(dphi), np.abs(dj)
    return {"t": np.array(used), "phi_dev": dphi, "j_rel_dev": dj,
            "max_phi_dev": float(dphi.max()), "max_j_rel_dev": float(dj.max())}


def orbit_j_of_phi(phi, j_tilde, params: OscillatorParams, form="printed"):
    """Action on the orbit through ``j_tilde`` as a function of angle.

    ``form="printed"``: ``J~ / (w + wa sin phi) exp(2 r arctan(tan phi + r))``
    with ``r = wa / w``, the expression as usually quoted.

    ``form="exact"``: the closed integral of ``dJ/dphi`` for the flow,
    ``J~ / (w + wa sin 2phi) exp(2 r / b arctan((tan phi + r) / b))`` with
    ``b = sqrt(1 - r^2)``.

    Both are discontinuous at ``phi = pi/2 (mod pi)``.  Requires ``wa < w``.
    """
    phi = np.asarray(phi, dtype=float)
    w, wa = params.omega, params.omega_alpha
    if wa >= w:
        raise ValueError("orbit formula needs omega_alpha < omega")
    r = wa / w
    if form == "printed":
        out = j_tilde / (w + wa * np.sin(phi)) * np.exp(2.0 * r * np.arctan(np.tan(phi) + r))
    elif form == "exact":
        b = math.sqrt(1.0 - r * r)
        out = (j_tilde / (w + wa * np.sin(2.0 * phi))
               * np.exp(2.0 * r / b * np.arctan((np.tan(phi) + r) / b)))
    else:
        raise ValueError(f"unknown form {form!r}")
    return out if out.ndim else float(out)


def orbit_consistency(traj: Trajectory, form="printed", edge=0.05):
    """Fit ``J~`` on each tangent branch of ``phi(t)`` and report the misfit.

    Returns the max over branches of ``max |J / (J~ orbit) - 1|``; samples
    within ``edge`` of the branch boundaries ``phi = pi/2 (mod pi)`` are dropped.
    """
    if traj.coords != "aa":
        raise ValueError("needs an action-angle trajectory")
    phi, j = traj.y[:, 0], traj.y[:, 1]
    branch = np.floor((phi + 0.5 * math.pi) / math.pi)
    offset = (phi + 0.5 * math.pi) - branch * math.pi
    keep = (offset > edge) & (offset < math.pi - edge)
    worst = 0.0
    for b in np.unique(branch[keep]):
        sel = keep & (branch == b)
        if sel.sum() < 3:
            continue
        ratio = j[sel] / orbit_j_of_phi(phi[sel], 1.0, traj.params, form)
        fit = np.median(ratio)
        worst = max(worst, float(np.max(np.abs(ratio / fit - 1.0))))
    return worst
