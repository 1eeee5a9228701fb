"""Closed-form classical quantities for the linearly damped oscillator.

The equations of motion are ``x' = v`` and ``v' = -omega**2 x - 2 omega_alpha v``.
Everything here is a pure function of immutable inputs.

Branch conventions
------------------
``arctan(v / (omega x))`` is always evaluated as ``atan2(v, omega x)``, so the
weak-dissipation quantities and the action-angle map are continuous except on
the ray ``v = 0, x < 0``.

The general constant of motion is local to the half planes ``v > 0`` and
``v < 0``: the arctangent in the underdamped ``G`` is taken on the branch
``[theta0, theta0 + pi)`` with ``theta0 = arctan(omega_alpha / beta)``.  This is
a function of ``v / x`` alone, continuous across ``x = 0`` and cut exactly on
``v = 0``, where ``K`` jumps by ``exp(-2 pi omega_alpha / beta)`` along the flow.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import (
    AxisUndefined,
    DomainError,
    MultipleRootsWarning,
    NoRootInBracket,
    NonConvergence,
    OriginUndefined,
    QuadraturePathInvalid,
)

#: Relative width of the critical band ``|omega_alpha^2 - omega^2| <= tol * omega^2``.
CRITICAL_TOLERANCE = 1e-12


@dataclass(frozen=True)
class OscillatorParams:
    """Physical parameters.

    Parameters
    ----------
    mass : float
        Particle mass (kg), > 0.
    omega : float
        Natural angular frequency ``sqrt(k/m)`` (rad/s), > 0.
    omega_alpha : float
        Dissipation parameter ``alpha / 2m`` (rad/s), >= 0.
    hbar : float
        Quantum of action (J s), > 0.
    """

    mass: float = 1.0
    omega: float = 1.0
    omega_alpha: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("mass", "omega", "omega_alpha", "hbar"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.mass <= 0 or self.omega <= 0 or self.hbar <= 0:
            raise ValueError("mass, omega and hbar must be strictly positive")
        if self.omega_alpha < 0:
            raise ValueError("omega_alpha must be non-negative")

    @classmethod
    def from_physical(cls, mass, spring, alpha, hbar=1.0):
        """Build from the raw constants of ``m x'' + alpha x' + k x = 0``."""
        return cls(mass, math.sqrt(spring / mass), alpha / (2.0 * mass), hbar)

    @property
    def alpha(self):
        return 2.0 * self.mass * self.omega_alpha

    @property
    def spring(self):
        return self.mass * self.omega**2

    def replace(self, **changes):
        fields = dict(mass=self.mass, omega=self.omega,
                      omega_alpha=self.omega_alpha, hbar=self.hbar)
        fields.update(changes)
        return OscillatorParams(**fields)


#: Parameters used for the (x, v) and (phi, J) trajectory figures.
FIGURE_PARAMS = OscillatorParams(mass=1.0, omega=1.0, omega_alpha=0.001)


@dataclass(frozen=True)
class PhaseState:
    x: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.v)):
            raise ValueError("phase state must be finite")


@dataclass(frozen=True)
class ActionAngleState:
    """Point in (phi, J); ``phi`` is not reduced mod 2 pi."""

    phi: float
    j: float

    def __post_init__(self):
        if not math.isfinite(self.phi) or not math.isfinite(self.j):
            raise ValueError("action-angle state must be finite")
        if self.j < 0:
            raise ValueError("action j must be non-negative")


class DampingRegime(enum.Enum):
    UNDERDAMPED = "underdamped"
    CRITICAL = "critical"
    OVERDAMPED = "overdamped"


def classify_regime(params: OscillatorParams) -> DampingRegime:
    w2 = params.omega**2
    diff = params.omega_alpha**2 - w2
    if abs(diff) <= CRITICAL_TOLERANCE * w2:
        return DampingRegime.CRITICAL
    return DampingRegime.OVERDAMPED if diff > 0 else DampingRegime.UNDERDAMPED


def damped_frequency(params: OscillatorParams) -> float:
    """``sqrt(|omega^2 - omega_alpha^2|)``; the oscillation frequency when underdamped."""
    return math.sqrt(abs(params.omega**2 - params.omega_alpha**2))


def _check_origin(state):
    if state.x == 0 and state.v == 0:
        raise OriginUndefined("undefined at the phase-space origin")


# -- vectorised kernels -------------------------------------------------------
# ``zero_side`` decides which half plane a point with v == 0 is attributed to:
# +1 puts it with v/x > 0 (the value of the formula at v = 0), -1 with v/x < 0,
# which is where a forward trajectory goes after touching v = 0.

def g_values(x, v, params, zero_side=1):
    """Evaluate G(v/x) elementwise; returns ``(G, sign)``.

    ``sign`` is -1 where the overdamped log argument is negative (``ln|.|`` is
    used there) and +1 elsewhere.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    wa = params.omega_alpha
    regime = classify_regime(params)
    on_axis = x == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = v / np.where(on_axis, 1.0, x)
        u = np.where(on_axis, np.inf, u)
    sign = np.ones(np.broadcast(x, v).shape)
    if regime is DampingRegime.UNDERDAMPED:
        beta = damped_frequency(params)
        lower = (u < 0) | ((v == 0) & (zero_side < 0))
        g = (np.arctan((wa + u) / beta) + np.pi * lower) / beta
        g = np.where(on_axis, 0.5 * np.pi / beta, g)
    elif regime is DampingRegime.CRITICAL:
        # -1/(omega_alpha + u): the printed +1/(...) does not satisfy the PDE.
        with np.errstate(divide="ignore"):
            g = np.where(on_axis, 0.0, -1.0 / (wa + np.where(on_axis, 0.0, u)))
    else:
        gamma = damped_frequency(params)
        uu = np.where(on_axis, 0.0, u)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (wa + uu - gamma) / (wa + uu + gamma)
            g = np.log(np.abs(ratio)) / (2.0 * gamma)
        sign = np.where((ratio < 0) & ~on_axis, -1.0, 1.0)
        g = np.where(on_axis, 0.0, g)
    return g, sign


def k_general_values(x, v, params, zero_side=1):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    g, _ = g_values(x, v, params, zero_side)
    m, w, wa = params.mass, params.omega, params.omega_alpha
    quad = v * v + 2.0 * wa * x * v + w * w * x * x
    return 0.5 * m * quad * np.exp(-2.0 * wa * g)


def k_weak_values(x, v, params):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    m, w, wa = params.mass, params.omega, params.omega_alpha
    r2 = v * v + w * w * x * x
    return 0.5 * m * r2 + (m * wa / w) * (x * v * w - r2 * np.arctan2(v, w * x))


def sho_energy(state: PhaseState, params: OscillatorParams) -> float:
    """Undamped energy ``m v^2 / 2 + m omega^2 x^2 / 2``."""
    return 0.5 * params.mass * (state.v**2 + params.omega**2 * state.x**2)


# -- constant of motion -------------------------------------------------------

def g_function(state: PhaseState, params: OscillatorParams, *, zero_side=1,
               return_sign=False):
    """The function G(v/x, omega, omega_alpha) in the exponent of the constant.

    With ``return_sign=True`` also returns the overdamped log-argument sign flag.
    """
    _check_origin(state)
    g, sign = g_values(state.x, state.v, params, zero_side)
    if return_sign:
        return float(g), int(sign)
    return float(g)


def k_general(state: PhaseState, params: OscillatorParams, *, zero_side=1) -> float:
    """Constant of motion valid in all three damping regimes."""
    _check_origin(state)
    return float(k_general_values(state.x, state.v, params, zero_side))


def k_weak(state: PhaseState, params: OscillatorParams) -> float:
    """First-order (weak dissipation) constant of motion."""
    _check_origin(state)
    return float(k_weak_values(state.x, state.v, params))


def _log_ratio(x, v, w):
    # ln((w^2 x^2 + v^2) / (w^2 x^2)) without cancellation for small v
    # and without overflow for small x
    a = w * x
    if abs(v) < abs(a):
        return math.log1p((v / a) ** 2)
    return 2.0 * (math.log(math.hypot(v, a)) - math.log(abs(a)))


def lagrangian_weak(state: PhaseState, params: OscillatorParams) -> float:
    x, v = state.x, state.v
    if x == 0:
        raise AxisUndefined("weak-dissipation Lagrangian needs x != 0")
    m, w, wa = params.mass, params.omega, params.omega_alpha
    a = w * x
    corr = (a * a - v * v) * math.atan2(v, a) + a * v * _log_ratio(x, v, w)
    return 0.5 * m * v * v - 0.5 * m * a * a + (m * wa / w) * corr


def momentum_weak(state: PhaseState, params: OscillatorParams) -> float:
    """Generalized momentum ``dL/dv`` of the weak-dissipation Lagrangian."""
    x, v = state.x, state.v
    if x == 0:
        raise AxisUndefined("generalized momentum needs x != 0")
    m, w, wa = params.mass, params.omega, params.omega_alpha
    a = w * x
    corr = a + a * _log_ratio(x, v, w) - 2.0 * v * math.atan2(v, a)
    return m * v + (m * wa / w) * corr


# -- numerical consistency checks ---------------------------------------------

def fd_step(z):
    return 1e-5 * (1.0 + abs(z))


KEvaluator = Callable[[PhaseState, OscillatorParams], float]


def pde_residual(k_evaluator: KEvaluator, state: PhaseState,
                 params: OscillatorParams, h=None) -> float:
    """``v dK/dx - (omega^2 x + 2 omega_alpha v) dK/dv`` by central differences.

    Vanishes for an exact constant of motion.  Keep ``state`` away from the
    branch lines of ``k_evaluator``.
    """
    x, v = state.x, state.v
    hx = fd_step(x) if h is None else h
    hv = fd_step(v) if h is None else h
    kx = (k_evaluator(PhaseState(x + hx, v), params)
          - k_evaluator(PhaseState(x - hx, v), params)) / (2 * hx)
    kv = (k_evaluator(PhaseState(x, v + hv), params)
          - k_evaluator(PhaseState(x, v - hv), params)) / (2 * hv)
    return v * kx - (params.omega**2 * x + 2.0 * params.omega_alpha * v) * kv


def euler_lagrange_residual(state: PhaseState, params: OscillatorParams) -> float:
    """``d/dt(dL/dv) - dL/dx`` of the weak Lagrangian along the damped flow.

    The time derivative is taken through the chain rule with ``(x', v')`` from
    the equations of motion; partials are central differences.
    """
    x, v = state.x, state.v
    hx, hv = fd_step(x), fd_step(v)
    p = momentum_weak
    px = (p(PhaseState(x + hx, v), params) - p(PhaseState(x - hx, v), params)) / (2 * hx)
    pv = (p(PhaseState(x, v + hv), params) - p(PhaseState(x, v - hv), params)) / (2 * hv)
    lx = (lagrangian_weak(PhaseState(x + hx, v), params)
          - lagrangian_weak(PhaseState(x - hx, v), params)) / (2 * hx)
    accel = -params.omega**2 * x - 2.0 * params.omega_alpha * v
    return px * v + pv * accel - lx


def lagrangian_via_quadrature(k_evaluator: KEvaluator, state: PhaseState,
                              params: OscillatorParams, xi_ref=None) -> float:
    """``v * integral_{xi_ref}^{v} K(x, xi) / xi^2 dxi``.

    Differs from :func:`lagrangian_weak` by a term linear in ``v`` that depends
    on ``xi_ref`` (default ``omega |x|`` with the sign of ``v``).
    """
    x, v = state.x, state.v
    if x == 0:
        raise AxisUndefined("quadrature Lagrangian needs x != 0")
    if xi_ref is None:
        xi_ref = math.copysign(params.omega * abs(x), v)
    if v == 0 or xi_ref == 0 or (v > 0) != (xi_ref > 0):
        raise QuadraturePathInvalid(
            f"path [{xi_ref}, {v}] must not contain xi = 0")

    def integrand(xi):
        return k_evaluator(PhaseState(x, xi), params) / (xi * xi)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(integrand, xi_ref, v,
                                           epsabs=1e-14, epsrel=1e-13, limit=200)
        except integrate.IntegrationWarning as exc:
            raise NonConvergence(str(exc)) from exc
    return v * value


def hamiltonian_implicit(x: float, p: float, params: OscillatorParams,
                         v_bracket=(-1.0, 1.0), xtol=1e-12) -> float:
    """Hamiltonian ``K(x, v(x, p))`` with ``v`` recovered numerically.

    ``momentum_weak(x, v) = p`` has no closed-form inverse; it is solved by
    Brent's bracketed method.  If the momentum is not monotonic inside the
    bracket a :class:`MultipleRootsWarning` is issued and the root of smallest
    ``|v|`` is used.
    """
    if x == 0:
        raise AxisUndefined("implicit Hamiltonian needs x != 0")
    lo, hi = sorted(float(b) for b in v_bracket)

    def f(v):
        return momentum_weak(PhaseState(x, v), params) - p

    grid = np.linspace(lo, hi, 257)
    vals = np.array([f(g) for g in grid])
    if np.any(np.diff(vals) <= 0) and np.any(np.diff(vals) > 0):
        roots = []
        for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if fa == 0:
                roots.append(a)
            elif fa * fb < 0:
                roots.append(optimize.brentq(f, a, b, xtol=xtol))
        if vals[-1] == 0:
            roots.append(hi)
        if not roots:
            raise NoRootInBracket(f"no root of p(x, v) = {p} in [{lo}, {hi}]")
        warnings.warn(f"momentum is not monotonic on [{lo}, {hi}]; "
                      f"{len(roots)} root(s) found", MultipleRootsWarning, stacklevel=2)
        v = min(roots, key=abs)
    else:
        if vals[0] * vals[-1] > 0:
            raise NoRootInBracket(f"no sign change of p(x, v) - {p} on [{lo}, {hi}]")
        v = optimize.brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return k_weak(PhaseState(x, v), params)


# -- action-angle variables ---------------------------------------------------

def to_action_angle(state: PhaseState, params: OscillatorParams) -> ActionAngleState:
    _check_origin(state)
    m, w = params.mass, params.omega
    phi = math.atan2(state.v, w * state.x)
    j = 0.5 * m / w * (state.v**2 + w * w * state.x**2)
    return ActionAngleState(phi, j)


def from_action_angle(aa: ActionAngleState, params: OscillatorParams) -> PhaseState:
    m, w = params.mass, params.omega
    return PhaseState(math.sqrt(2.0 * aa.j / (m * w)) * math.cos(aa.phi),
                      math.sqrt(2.0 * w * aa.j / m) * math.sin(aa.phi))


def k_action_angle(aa: ActionAngleState, params: OscillatorParams) -> float:
    w, wa = params.omega, params.omega_alpha
    return w * aa.j + wa * aa.j * (math.sin(2 * aa.phi) - 2 * aa.phi)


def _log_cos(phi):
    c = math.cos(phi)
    if c <= 0:
        raise DomainError(f"ln(cos phi) undefined at phi = {phi} (cos phi = {c})")
    return math.log(c)


def lagrangian_action_angle(aa: ActionAngleState, params: OscillatorParams,
                            form="printed") -> float:
    """Weak-dissipation Lagrangian in (phi, J).

    ``form="printed"`` gives the expression as usually quoted,
    ``-w J cos 2phi + 2 wa J [cos 2phi - 4 sin 2phi ln cos phi]``.
    ``form="derived"`` is the direct substitution of the (x, v) map into
    :func:`lagrangian_weak`, ``-w J cos 2phi + 2 wa J [phi cos 2phi - sin 2phi
    ln cos phi]``; only this one agrees with the (x, v) Lagrangian.
    """
    w, wa, phi, j = params.omega, params.omega_alpha, aa.phi, aa.j
    lc = _log_cos(phi)
    c2, s2 = math.cos(2 * phi), math.sin(2 * phi)
    if form == "printed":
        corr = c2 - 4.0 * s2 * lc
    elif form == "derived":
        corr = phi * c2 - s2 * lc
    else:
        raise ValueError(f"unknown form {form!r}")
    return -w * j * c2 + 2.0 * wa * j * corr


def momentum_action_angle(aa: ActionAngleState, params: OscillatorParams) -> float:
    m, w, wa, phi, j = params.mass, params.omega, params.omega_alpha, aa.phi, aa.j
    lc = _log_cos(phi)
    return (math.sqrt(2 * m * w * j) * math.sin(phi)
            + wa * math.sqrt(2 * m * j / w)
            * (math.cos(phi) * (1 - 2 * lc) - 2 * phi * math.sin(phi)))
