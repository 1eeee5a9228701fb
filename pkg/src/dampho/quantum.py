"""Quantized constant of motion on a truncated Fock basis.

``K = K_o + K_I`` with ``K_o = hbar w (N + 1/2)`` and the dissipative part

    K_I = (wa/3) [JCS + CJS + CSJ + JSC + SJC + SCJ] - wa [J phi + phi J]

built from ``J = hbar (N + 1/2)``, the sine/cosine operators ``S``, ``C`` and
the phase operator ``phi = pi/2 - sum_k (-1)^k binom(-1/2, k) C^(2k+1) / (2k+1)``.

``C^(2k+1)`` couples ``|n>`` to ``|n +- (2k+1)>``, so truncating the basis at
``n_max`` and the series at ``series_k_max`` contaminates the last
``2 series_k_max + 2`` levels.  Everything reported here is restricted to the
trusted window below that band.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .errors import OutsideTrustedWindow, SeriesNotConverged, TruncationUnstable
from .model import OscillatorParams

STABILITY_TOL = 1e-8


@dataclass(frozen=True)
class FockSpaceConfig:
    """Basis and series truncation.

    ``series_tol`` bounds the largest entry of the last retained phase-series
    term on the trusted window.  The series is arcsin(C) evaluated at spectral
    radius ~1, so its terms only decay like ``k^-3/2``.
    """

    n_max: int = 256
    series_k_max: int = 64
    series_tol: float = 1e-4

    def __post_init__(self):
        if self.series_k_max < 1:
            raise ValueError("series_k_max must be >= 1")
        if self.n_max <= self.validity_margin:
            raise ValueError(
                f"n_max={self.n_max} must exceed 2*series_k_max+2={self.validity_margin}")
        if not self.series_tol > 0:
            raise ValueError("series_tol must be positive")

    @property
    def validity_margin(self):
        return 2 * self.series_k_max + 2

    @property
    def trusted_window(self):
        """Levels ``n < trusted_window`` are unaffected by truncation."""
        return self.n_max - self.validity_margin


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: np.ndarray
    label: str
    trusted_window: int
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def trusted(self):
        w = self.trusted_window
        return self.entries[:w, :w]

    def hermiticity_error(self):
        t = self.trusted
        return float(np.max(np.abs(t - t.conj().T)))

    def __getitem__(self, idx):
        return self.entries[idx]


def _check_level(n, config):
    if not 0 <= n < config.trusted_window:
        raise OutsideTrustedWindow(
            f"level {n} outside trusted window [0, {config.trusted_window})")


def binom_half(k):
    """``binom(-1/2, k)`` by the multiplicative recurrence."""
    b = 1.0
    for i in range(1, k + 1):
        b *= (-0.5 - i + 1) / i
    return b


def phase_series_coefficients(k_max):
    """Coefficients ``(-1)^k binom(-1/2, k) / (2k+1)`` for ``k = 0..k_max``."""
    out = np.empty(k_max + 1)
    b = 1.0
    for k in range(k_max + 1):
        if k:
            b *= (-0.5 - k + 1) / k
        out[k] = (-1) ** k * b / (2 * k + 1)
    return out


def commutator(a, b):
    a = getattr(a, "entries", a)
    b = getattr(b, "entries", b)
    return a @ b - b @ a


def _apply_cosine(m):
    """``C @ m`` for the tridiagonal cosine operator, in O(n^2)."""
    out = np.zeros_like(m)
    out[1:] += m[:-1]
    out[:-1] += m[1:]
    out *= 0.5
    return out


def build_ladder(config: FockSpaceConfig, params: OscillatorParams | None = None):
    """Truncated ``a``, ``a^dagger`` and ``N = a^dagger a``."""
    n = config.n_max
    a = np.diag(np.sqrt(np.arange(1.0, n)), k=1)
    adag = a.T.copy()
    num = adag @ a
    w = config.trusted_window
    return (OperatorMatrix(a, "a", w), OperatorMatrix(adag, "a_dagger", w),
            OperatorMatrix(num, "N", w))


def build_j_op(config: FockSpaceConfig, params: OscillatorParams) -> OperatorMatrix:
    j = params.hbar * (np.arange(config.n_max) + 0.5)
    return OperatorMatrix(np.diag(j), "J", config.trusted_window)


def build_k_free(config: FockSpaceConfig, params: OscillatorParams) -> OperatorMatrix:
    """``K_o = w J = hbar w (N + 1/2)``."""
    j = params.hbar * (np.arange(config.n_max) + 0.5)
    return OperatorMatrix(np.diag(params.omega * j), "K_o", config.trusted_window)


def build_sine_cosine(config: FockSpaceConfig):
    """``S|n> = (i/2)(|n+1> - |n-1>)`` and ``C|n> = (|n+1> + |n-1>)/2``."""
    n = config.n_max
    off = np.full(n - 1, 0.5)
    c = np.diag(off, 1) + np.diag(off, -1)
    s = (np.diag(-0.5j * np.ones(n - 1), 1) + np.diag(0.5j * np.ones(n - 1), -1))
    w = config.trusted_window
    return OperatorMatrix(s, "S", w), OperatorMatrix(c, "C", w)


def ground_projector(config: FockSpaceConfig) -> np.ndarray:
    p = np.zeros((config.n_max, config.n_max))
    p[0, 0] = 1.0
    return p


@functools.lru_cache(maxsize=8)
def build_phi_op(config: FockSpaceConfig) -> OperatorMatrix:
    """Phase operator from its truncated series, symmetrized.

    ``info`` records the largest entry of the last retained term on the trusted
    window (``last_term``) and the norm bound ``pi/2 - sum |coeff|`` on the
    dropped tail (``tail_bound``).
    """
    n, w = config.n_max, config.trusted_window
    coeffs = phase_series_coefficients(config.series_k_max)
    power = np.diag(np.full(n - 1, 0.5), 1) + np.diag(np.full(n - 1, 0.5), -1)
    phi = 0.5 * np.pi * np.eye(n)
    term = None
    for k, c in enumerate(coeffs):
        if k:
            power = _apply_cosine(_apply_cosine(power))
        term = c * power
        phi -= term
    phi = 0.5 * (phi + phi.T)
    last_term = float(np.max(np.abs(term[:w, :w])))
    tail_bound = float(0.5 * np.pi - np.sum(np.abs(coeffs)))
    if last_term > config.series_tol:
        raise SeriesNotConverged(
            f"last phase-series term has entries up to {last_term:.3e} "
            f"> series_tol={config.series_tol:.1e}")
    return OperatorMatrix(phi, "phi", w,
                          {"last_term": last_term, "tail_bound": tail_bound})


def phi_exact_element(k, n):
    """``<k|arccos(C)|n>`` for the untruncated half-infinite basis.

    With ``C`` diagonal in ``sqrt(2/pi) sin((n+1) theta)``, the entries are
    ``(2/pi) int_0^pi theta sin((k+1)theta) sin((n+1)theta) dtheta``.
    """
    if k == n:
        return 0.5 * math.pi
    p, q = k + 1, n + 1
    if (p - q) % 2 == 0:
        return 0.0
    return (2.0 / (p + q) ** 2 - 2.0 / (p - q) ** 2) / math.pi


def phi_element_series(k, n, series_k_max):
    """``<k|phi|n>`` from the series truncated at ``series_k_max``, on an untruncated basis.

    Applies ``C`` to ``|n>`` repeatedly; cost is O(series_k_max^2), so very
    long series are cheap compared with :func:`build_phi_op`.
    """
    size = n + 2 * series_k_max + 3
    vec = np.zeros(size)
    vec[n] = 1.0
    vec = _apply_cosine(vec)
    coeffs = phase_series_coefficients(series_k_max)
    total = 0.5 * math.pi if k == n else 0.0
    for i, c in enumerate(coeffs):
        if i:
            vec = _apply_cosine(_apply_cosine(vec))
        total -= c * vec[k]
    return total


@functools.lru_cache(maxsize=8)
def build_k_interaction(config: FockSpaceConfig, params: OscillatorParams) -> OperatorMatrix:
    """Dissipative part ``K_I`` of the quantized constant, symmetrized."""
    j = params.hbar * (np.arange(config.n_max) + 0.5)
    s, c = build_sine_cosine(config)
    s, c = s.entries, c.entries
    phi = build_phi_op(config).entries
    cs, sc = c @ s, s @ c
    jc, js = j[:, None] * c, j[:, None] * s
    ordered = (j[:, None] * cs + c @ js + cs * j[None, :]
               + j[:, None] * sc + s @ jc + sc * j[None, :])
    wa = params.omega_alpha
    k_i = (wa / 3.0) * ordered - wa * (j[:, None] * phi + phi * j[None, :])
    k_i = 0.5 * (k_i + k_i.conj().T)
    return OperatorMatrix(k_i, "K_I", config.trusted_window)


def first_order_shift(n, config: FockSpaceConfig, params: OscillatorParams) -> float:
    """``<n|K_I|n>``; equals ``-hbar wa pi (n + 1/2)``."""
    _check_level(n, config)
    return float(build_k_interaction(config, params).entries[n, n].real)


def shifted_frequency(params: OscillatorParams) -> float:
    """First-order level spacing over hbar, ``w - pi wa``."""
    return params.omega - math.pi * params.omega_alpha


def matrix_element_closed_form(k, n, config: FockSpaceConfig,
                               params: OscillatorParams) -> complex:
    """``<k|K_I|n>`` from the commonly quoted closed form.

    ``(hbar wa/12)[(2k+4n+5) d(k,n+2) - (2k+4n+1) d(k,n-2)]
    + hbar wa (n+k+1) sum_l sum_s (-1)^l/(2l+1) binom(-1/2,l) binom(2l+1,s) d(k, n-2l-1-s)``

    with ``l <= series_k_max``.  Compare with the constructed matrix through
    :func:`matrix_element_table`; the two do not agree.
    """
    _check_level(k, config)
    _check_level(n, config)
    hw = params.hbar * params.omega_alpha
    val = 0.0
    if k == n + 2:
        val += hw / 12.0 * (2 * k + 4 * n + 5)
    if k == n - 2:
        val -= hw / 12.0 * (2 * k + 4 * n + 1)
    d = n - 1 - k  # = 2l + s
    if d >= 0:
        acc = 0.0
        for l in range(min(d // 2, config.series_k_max) + 1):
            s = d - 2 * l
            if s <= 2 * l + 1:
                acc += (-1) ** l / (2 * l + 1) * binom_half(l) * math.comb(2 * l + 1, s)
        val += hw * (n + k + 1) * acc
    return complex(val)


def matrix_element_table(config: FockSpaceConfig, params: OscillatorParams, size=8):
    """Rows ``(k, n, closed_form, constructed, |difference|, ||closed| - |constructed||)``."""
    k_i = build_k_interaction(config, params).entries
    rows = []
    for k in range(size):
        for n in range(size):
            cf = matrix_element_closed_form(k, n, config, params)
            m = complex(k_i[k, n])
            rows.append((k, n, cf, m, abs(cf - m), abs(abs(cf) - abs(m))))
    return rows


def _second_order_terms(config, params):
    """``|<k|K_I|n>|^2 / (E_n - E_k)`` for ``k, n`` in the window, zero diagonal."""
    w = config.trusted_window
    v2 = np.abs(build_k_interaction(config, params).entries[:w, :w]) ** 2
    levels = np.arange(w)
    gap = params.hbar * params.omega * (levels[None, :] - levels[:, None])
    np.fill_diagonal(gap, 1.0)
    terms = v2 / gap
    np.fill_diagonal(terms, 0.0)
    return terms


def second_order_shift_sum(n, config: FockSpaceConfig, params: OscillatorParams) -> float:
    """Sum-over-states second-order shift, ``k`` restricted to the trusted window."""
    _check_level(n, config)
    return float(np.sum(_second_order_terms(config, params)[:, n]))


def second_order_tail_estimate(n, config: FockSpaceConfig, params: OscillatorParams) -> float:
    """Magnitude of the part of the second-order sum beyond the window.

    Only the phase term couples ``|n>`` that far out; its matrix elements are
    taken from the untruncated kernel :func:`phi_exact_element`, whose squares
    fall off like ``k^-2``.  Summed explicitly to ``100 * window`` with the
    remaining ``k^-3`` tail added in closed form.
    """
    _check_level(n, config)
    w = config.trusted_window
    k = np.arange(w, 100 * w)
    p, q = k + 1, n + 1
    phi = np.where((p - q) % 2 == 1, (2.0 / (p + q) ** 2 - 2.0 / (p - q) ** 2) / np.pi, 0.0)
    v = params.hbar * params.omega_alpha * (k + n + 1) * phi
    terms = v * v / (params.hbar * params.omega * (k - n))
    # odd k - n only: the last term times k_end / 4 approximates the rest
    rest = terms[-1] * k[-1] / 4.0 if terms[-1] else terms[-2] * k[-2] / 4.0
    return float(np.sum(terms) + rest)


@functools.lru_cache(maxsize=16)
def _closed_form_sums(series_k_max):
    # sum_s binom(-1/2,l)^2 binom(2l+1,s)^2 (2n-2l-s)^2 / ((2l+1)^2 (2l+1+s))
    # expanded in powers of n: 4 n^2 T0 - 4 n T1 + T2
    t0 = t1 = t2 = Fraction(0)
    bh = Fraction(1)
    for l in range(series_k_max + 1):
        if l:
            bh *= Fraction(-2 * l + 1, 2 * l)
        for s in range(2 * l + 2):
            wgt = bh * bh * math.comb(2 * l + 1, s) ** 2 / ((2 * l + 1) ** 2 * (2 * l + 1 + s))
            m = 2 * l + s
            t0 += wgt
            t1 += wgt * m
            t2 += wgt * m * m
    return t0, t1, t2


def second_order_closed_form(n, config: FockSpaceConfig, params: OscillatorParams) -> float:
    """The commonly quoted closed form of the second-order shift.

    ``-(hbar wa^2 / w) [(2n/3 + 1/4) - sum_{l<=L} sum_s binom(-1/2,l)^2
    binom(2l+1,s)^2 (2n-2l-s)^2 / ((2l+1)^2 (2l+1+s))]``

    The double sum grows like ``binom(2L+1, L)^2``; the value is reported for
    comparison with :func:`second_order_shift_sum` only.
    """
    _check_level(n, config)
    n = int(n)
    t0, t1, t2 = _closed_form_sums(config.series_k_max)
    bracket = Fraction(2 * n, 3) + Fraction(1, 4) - (4 * n * n * t0 - 4 * n * t1 + t2)
    return -params.hbar * params.omega_alpha**2 / params.omega * float(bracket)


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Per-level perturbative and diagonalized energies (all in J).

    ``de2`` is the sum-over-states second-order shift and ``de2_closed`` the
    quoted closed form.  ``rel_change`` is the per-level relative move of
    ``e_diag`` when ``n_max`` is doubled (zeros if not checked) and ``stable``
    is False if any of them exceeds ``STABILITY_TOL``.
    """

    n: np.ndarray
    e0: np.ndarray
    de1: np.ndarray
    de2: np.ndarray
    e_pert: np.ndarray
    e_diag: np.ndarray
    de2_closed: np.ndarray
    de2_tail: np.ndarray
    params: OscillatorParams
    config: FockSpaceConfig
    rel_change: np.ndarray
    max_rel_change: float
    stable: bool

    COLUMNS = ("n", "e0", "de1", "de2", "e_pert", "e_diag", "diag_minus_pert",
               "de2_closed", "de2_closed_minus_sum", "de2_tail", "rel_change_2n",
               "stable")

    def rows(self):
        for i in range(len(self.n)):
            yield (int(self.n[i]), self.e0[i], self.de1[i], self.de2[i], self.e_pert[i],
                   self.e_diag[i], self.e_diag[i] - self.e_pert[i], self.de2_closed[i],
                   self.de2_closed[i] - self.de2[i], self.de2_tail[i],
                   self.rel_change[i], int(self.rel_change[i] <= STABILITY_TOL))


def full_constant(config: FockSpaceConfig, params: OscillatorParams) -> np.ndarray:
    k = build_k_free(config, params).entries + build_k_interaction(config, params).entries
    return 0.5 * (k + k.conj().T)


def eigenvalues(config: FockSpaceConfig, params: OscillatorParams) -> np.ndarray:
    """Ascending spectrum of the full truncated ``K_o + K_I``."""
    return np.linalg.eigvalsh(full_constant(config, params))


def diagonalize_k(config: FockSpaceConfig, params: OscillatorParams, levels=None,
                  check_stability=True, strict=True) -> SpectrumReport:
    """Diagonalize ``K`` and pair the lowest eigenvalues with perturbation theory.

    With ``check_stability`` the spectrum is recomputed with ``2 n_max``; if
    the reported eigenvalues move by more than ``STABILITY_TOL`` relative the
    report is flagged, and :class:`TruncationUnstable` is raised when ``strict``.
    """
    w = config.trusted_window
    levels = w if levels is None else int(levels)
    if not 0 < levels <= w:
        raise OutsideTrustedWindow(f"levels must be in 1..{w}")
    n = np.arange(levels)
    e_diag = eigenvalues(config, params)[:levels]
    e0 = params.hbar * params.omega * (n + 0.5)
    k_i = build_k_interaction(config, params).entries
    de1 = np.real(np.diag(k_i))[:levels].copy()
    de2 = np.sum(_second_order_terms(config, params), axis=0)[:levels]
    de2_closed = np.array([second_order_closed_form(i, config, params) for i in n])
    tail = np.array([second_order_tail_estimate(i, config, params) for i in n])

    change = np.zeros(levels)
    if check_stability:
        bigger = replace(config, n_max=2 * config.n_max)
        e_big = eigenvalues(bigger, params)[:levels]
        change = np.abs(e_big - e_diag) / np.abs(e_diag)
    max_change = float(np.max(change))
    stable = max_change <= STABILITY_TOL
    report = SpectrumReport(n, e0, de1, de2, e0 + de1 + de2, e_diag, de2_closed, tail,
                            params, config, change, max_change, stable)
    if strict and not stable:
        raise TruncationUnstable(
            f"doubling n_max moved eigenvalues by {max_change:.3e} relative", report)
    return report
