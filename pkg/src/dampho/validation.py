"""Invariant checks run by ``dampho validate``.

Each check measures one quantity and compares it against a fixed threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dynamics, model, quantum
from .dynamics import IntegratorConfig, integrate_action_angle, integrate_xv
from .model import FIGURE_PARAMS, ActionAngleState, OscillatorParams, PhaseState


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    threshold: str
    passed: bool

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<34s} measured={self.measured:.6g}  required {self.threshold}"


def _le(name, measured, limit):
    return Check(name, float(measured), f"<= {limit:g}", bool(measured <= limit))


def _near(name, measured, target, tol):
    return Check(name, float(measured), f"{target:g} +- {tol:g}",
                 bool(abs(measured - target) <= tol))


def _random_states(n, seed=7, lo=0.2, hi=2.0):
    rng = np.random.default_rng(seed)
    r = rng.uniform(lo, hi, n)
    ang = rng.uniform(-math.pi, math.pi, n)
    return [PhaseState(float(a), float(b)) for a, b in zip(r * np.cos(ang), r * np.sin(ang))]


# -- core model -----------------------------------------------------------------

def check_regime_totality():
    bad = 0
    for w in (0.5, 1.0, 3.0):
        for wa in (0.0, 1e-3, 0.5 * w, w, w * (1 + 1e-14), 2 * w):
            regime = model.classify_regime(OscillatorParams(omega=w, omega_alpha=wa))
            bad += sum(regime is r for r in model.DampingRegime) != 1
    return _le("regime totality (failures)", bad, 0)


def check_pde_residual_general():
    p = FIGURE_PARAMS
    states = [PhaseState(1.0, 0.5), PhaseState(-0.7, 0.4), PhaseState(0.8, -0.6),
              PhaseState(-1.2, -0.3)]
    worst = max(abs(model.pde_residual(model.k_general, s, p)) for s in states)
    return _le("K_general PDE residual (both v signs)", worst, 1e-6)


def check_weak_residual_exponent():
    s = PhaseState(1.0, 0.5)
    r1 = model.pde_residual(model.k_weak, s, OscillatorParams(omega_alpha=0.001))
    r2 = model.pde_residual(model.k_weak, s, OscillatorParams(omega_alpha=0.002))
    return _near("K_weak residual exponent", math.log2(r2 / r1), 2.0, 0.1)


def check_alpha_limit_slope():
    states = _random_states(1000)
    was = np.array([1e-5, 1e-4, 1e-3])
    x = np.array([s.x for s in states])
    v = np.array([s.v for s in states])
    dev = []
    for wa in was:
        p = OscillatorParams(omega_alpha=float(wa))
        k = model.k_general_values(x, v, p)
        dev.append(np.max(np.abs(k - 0.5 * (v * v + x * x))))
    slope = np.polyfit(np.log(was), np.log(dev), 1)[0]
    return _near("alpha -> 0 limit slope", slope, 1.0, 0.1)


def check_momentum_fd():
    p = OscillatorParams(omega_alpha=0.01)
    worst = 0.0
    for s in _random_states(50, seed=3):
        if abs(s.x) < 0.3:
            continue
        h = model.fd_step(s.v)
        fd = (model.lagrangian_weak(PhaseState(s.x, s.v + h), p)
              - model.lagrangian_weak(PhaseState(s.x, s.v - h), p)) / (2 * h)
        pm = model.momentum_weak(s, p)
        worst = max(worst, abs(fd - pm) / max(abs(pm), 1e-300))
    return _le("momentum = dL/dv (rel)", worst, 1e-5)


def euler_lagrange_exponent(omega_alpha=0.001):
    """Exponent of the Euler-Lagrange residual in omega_alpha along a trajectory."""
    base = OscillatorParams(omega_alpha=omega_alpha)
    traj = integrate_xv(PhaseState(1.0, 0.0), base, (0.0, 2 * math.pi))
    pts = [PhaseState(float(a), float(b)) for a, b in traj.y[::5] if abs(a) > 0.2]
    res = []
    for wa in (omega_alpha, 2 * omega_alpha):
        p = base.replace(omega_alpha=wa)
        res.append(max(abs(model.euler_lagrange_residual(s, p)) for s in pts))
    return math.log2(res[1] / res[0])


def check_euler_lagrange():
    return _near("Euler-Lagrange residual exponent", euler_lagrange_exponent(), 2.0, 0.1)


def quadrature_curvature_mismatch(state=PhaseState(1.0, 0.5),
                                  params=OscillatorParams(omega_alpha=0.001), h=1e-3):
    """Relative gap between d2/dv2 of the quadrature and closed-form Lagrangians."""
    xi_ref = math.copysign(params.omega * abs(state.x), state.v)

    def lq(v):
        return model.lagrangian_via_quadrature(model.k_weak, PhaseState(state.x, v),
                                               params, xi_ref)

    def lc(v):
        return model.lagrangian_weak(PhaseState(state.x, v), params)

    v = state.v
    d2q = (lq(v + h) - 2 * lq(v) + lq(v - h)) / (h * h)
    d2c = (lc(v + h) - 2 * lc(v) + lc(v - h)) / (h * h)
    return abs(d2q - d2c) / abs(d2c)


def check_quadrature():
    states = (PhaseState(1.0, 0.5), PhaseState(-0.8, 0.3), PhaseState(0.6, -0.9),
              PhaseState(1.3, 1.1))
    worst = max(quadrature_curvature_mismatch(s) for s in states)
    return _le("quadrature vs closed-form d2L/dv2", worst, 1e-5)


def check_action_angle_roundtrip():
    p = OscillatorParams(mass=1.3, omega=0.7)
    worst = 0.0
    for s in _random_states(1000, seed=11):
        back = model.from_action_angle(model.to_action_angle(s, p), p)
        worst = max(worst, math.hypot(back.x - s.x, back.v - s.v) / math.hypot(s.x, s.v))
    return _le("action-angle roundtrip (rel)", worst, 1e-13)


def check_k_action_angle():
    p = OscillatorParams(omega_alpha=0.01)
    worst = 0.0
    for s in _random_states(200, seed=5):
        a = model.k_action_angle(model.to_action_angle(s, p), p)
        b = model.k_weak(s, p)
        worst = max(worst, abs(a - b) / abs(b))
    return _le("K(phi,J) = K_weak(x,v) (rel)", worst, 1e-12)


# -- classical dynamics -----------------------------------------------------------

def _figure_runs(action_angle_rhs=None):
    p = FIGURE_PARAMS
    span = (0.0, 20 * math.pi)
    xv = integrate_xv(PhaseState(1.0, 0.0), p, span)
    rhs = None if action_angle_rhs is None else action_angle_rhs(p)
    aa = integrate_action_angle(ActionAngleState(0.0, 0.5), p, span, rhs=rhs)
    return xv, aa


def coordinate_deviation(xv, aa):
    """Max pointwise gap between mapped (x, v) samples and direct (phi, J) samples."""
    p = xv.params
    x, v = xv.y[:, 0], xv.y[:, 1]
    phi_x = np.arctan2(v, p.omega * x)
    j_x = 0.5 * p.mass / p.omega * (v * v + p.omega**2 * x * x)
    dphi = (aa.y[:, 0] - phi_x + math.pi) % (2 * math.pi) - math.pi
    winding = np.unwrap(phi_x) - aa.y[:, 0]
    return max(float(np.max(np.abs(dphi))), float(np.max(np.abs(aa.y[:, 1] - j_x))),
               float(np.max(np.abs(winding))))


def classical_checks(action_angle_rhs=None):
    xv, aa = _figure_runs(action_angle_rhs)
    drift = max(dynamics.invariance_drift(xv, s) for s in xv.segments())
    pred = dynamics.predicted_jump_ratio(xv.params)
    jump = max(abs(c.ratio / pred - 1) for c in xv.crossings)
    x, v = xv.y[:, 0], xv.y[:, 1]
    energy = 0.5 * (v * v + x * x)
    rise = float(np.max(np.diff(energy)))
    j_rise = float(np.max(np.diff(aa.y[:, 1])))
    return [
        _le("K_general drift between crossings", drift, 1e-6),
        _le("crossing jump ratio (rel)", jump, 1e-6),
        _le("(x,v) vs (phi,J) integration", coordinate_deviation(xv, aa), 1e-8),
        _le("energy increase between samples", rise, 0.0),
        _le("J increase between samples", j_rise, 0.0),
        _le("orbit J(phi) fit, exact form", dynamics.orbit_consistency(aa, "exact"), 1e-6),
    ]


# -- quantum spectrum ------------------------------------------------------------

def quantum_checks(config=None):
    cfg = config or quantum.FockSpaceConfig()
    p = OscillatorParams(omega_alpha=0.001)
    w = cfg.trusted_window
    a, adag, num = quantum.build_ladder(cfg, p)
    s, c = quantum.build_sine_cosine(cfg)
    phi = quantum.build_phi_op(cfg)
    k_i = quantum.build_k_interaction(cfg, p)
    ops = [adag.entries @ a.entries, quantum.build_j_op(cfg, p).entries, s.entries,
           c.entries, phi.entries, k_i.entries, quantum.full_constant(cfg, p)]
    herm = max(float(np.max(np.abs((m - m.conj().T)[:w, :w]))) for m in ops)

    n_, c_, s_ = num.entries, c.entries, s.entries
    eye = np.eye(cfg.n_max)
    comm = max(
        np.max(np.abs((quantum.commutator(a, adag) - eye)[:w, :w])),
        np.max(np.abs((quantum.commutator(c_, n_) - 1j * s_)[:w, :w])),
        np.max(np.abs((quantum.commutator(s_, n_) + 1j * c_)[:w, :w])),
        np.max(np.abs((quantum.commutator(c_, s_) - 0.5j * quantum.ground_projector(cfg))[:w, :w])),
    )
    phi_diag = float(np.max(np.abs(np.diag(phi.entries)[:w] - 0.5 * math.pi)))

    levels = np.arange(21)
    de1 = np.array([quantum.first_order_shift(int(n), cfg, p) for n in levels])
    target = -p.hbar * p.omega_alpha * math.pi * (levels + 0.5)
    first = float(np.max(np.abs(de1 / target - 1)))
    e1 = p.hbar * p.omega * (levels + 0.5) + de1
    spacing = float(np.max(np.abs(np.diff(e1) / (p.hbar * quantum.shifted_frequency(p)) - 1)))

    p2 = p.replace(omega_alpha=0.002)
    d1 = np.array([quantum.second_order_shift_sum(n, cfg, p) for n in range(6)])
    d2 = np.array([quantum.second_order_shift_sum(n, cfg, p2) for n in range(6)])
    quad_exp = float(np.max(np.abs(np.log2(d2 / d1) - 2)))

    r1 = quantum.diagonalize_k(cfg, p, levels=6)
    r2 = quantum.diagonalize_k(cfg, p2, levels=6, check_stability=False)
    ratios = (r2.e_diag - r2.e_pert) / (r1.e_diag - r1.e_pert)
    ratio_dev = float(np.max(np.abs(ratios / 8 - 1)))

    return [
        _le("hermiticity (trusted window)", herm, 1e-12),
        _le("commutators [a,a+],[C,N],[S,N],[C,S]", comm, 1e-12),
        _le("diag(phi) - pi/2", phi_diag, 0.0),
        _le("first-order shift (rel, n<=20)", first, 1e-3),
        _le("first-order spacing / (w - pi wa)", spacing, 1e-3),
        _le("second-order exponent - 2", quad_exp, 1e-3),
        _le("(e_diag - e_pert) ratio / 8 - 1", ratio_dev, 0.2),
        _le("eigenvalue change on doubling n_max", r1.max_rel_change, quantum.STABILITY_TOL),
    ]


def notes():
    """Informational comparisons against quoted formulas; they never gate."""
    cfg = quantum.FockSpaceConfig()
    p = OscillatorParams(omega_alpha=0.001)
    s, c = quantum.build_sine_cosine(cfg)
    quoted = quantum.ground_projector(cfg) / 2j
    w = cfg.trusted_window
    cs_gap = float(np.max(np.abs((quantum.commutator(c, s) - quoted)[:w, :w])))
    _, aa = _figure_runs()
    printed = dynamics.orbit_consistency(aa, "printed")
    d2 = quantum.second_order_shift_sum(0, cfg, p)
    d2c = quantum.second_order_closed_form(0, cfg, p)
    return [
        f"note  [C,S] vs quoted pi0/(2i): max gap {cs_gap:.3g}",
        f"note  orbit J(phi), printed form: misfit {printed:.3g}",
        f"note  second order n=0: sum-over-states {d2:.6g}, quoted closed form {d2c:.6g}",
    ]


def run_checks(action_angle_rhs=None, quantum_config=None):
    """All checks in order.

    ``action_angle_rhs`` is a factory ``params -> rhs(phi, J)`` that replaces
    the built-in action-angle flow; used to confirm the consistency check can fail.
    """
    checks = [
        check_regime_totality(),
        check_pde_residual_general(),
        check_weak_residual_exponent(),
        check_alpha_limit_slope(),
        check_momentum_fd(),
        check_euler_lagrange(),
        check_quadrature(),
        check_action_angle_roundtrip(),
        check_k_action_angle(),
    ]
    checks += classical_checks(action_angle_rhs)
    checks += quantum_checks(quantum_config)
    return checks
