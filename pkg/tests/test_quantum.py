import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dampho import quantum
from dampho.errors import OutsideTrustedWindow, SeriesNotConverged, TruncationUnstable
from dampho.model import OscillatorParams
from dampho.quantum import FockSpaceConfig

import oracles

CFG = FockSpaceConfig()
P = OscillatorParams(omega_alpha=0.001)
SHO = OscillatorParams()
SMALL = FockSpaceConfig(n_max=64, series_k_max=16, series_tol=1e-3)

# sum-over-states n = 0 at the defaults; the curvature oracle reproduces it to 2e-9
DE2_GROUND = -1.574314550601935e-06


def test_config_window():
    assert CFG.validity_margin == 130
    assert CFG.trusted_window == 126
    with pytest.raises(ValueError):
        FockSpaceConfig(n_max=20, series_k_max=10)


def test_operator_is_read_only():
    a, _, _ = quantum.build_ladder(SMALL)
    with pytest.raises(ValueError):
        a.entries[0, 0] = 1.0


def test_ladder_elements():
    a, adag, num = quantum.build_ladder(CFG, P)
    assert a[0, 1] == 1.0
    assert adag[2, 1] == pytest.approx(math.sqrt(2), rel=1e-15)
    assert num[5, 5] == pytest.approx(5.0, rel=1e-15)
    comm = quantum.commutator(a, adag)
    n = CFG.n_max - 1
    assert np.max(np.abs(comm[:n, :n] - np.eye(n))) < 1e-12


def test_action_and_free_constant():
    p = OscillatorParams(omega=2.0, hbar=0.5)
    j = quantum.build_j_op(CFG, p)
    assert j[0, 0] == 0.25 and j[3, 3] == 3.5 * 0.5
    k0 = quantum.build_k_free(CFG, p)
    n = np.arange(CFG.n_max)
    assert np.allclose(np.diag(k0.entries), 0.5 * 2.0 * (n + 0.5), rtol=1e-15)


def test_sine_cosine_elements():
    s, c = quantum.build_sine_cosine(CFG)
    assert s[1, 0] == 0.5j
    assert c[1, 0] == 0.5


def _window(m, w=CFG.trusted_window):
    return m[:w, :w]


def test_commutators_with_number():
    _, _, num = quantum.build_ladder(CFG)
    s, c = quantum.build_sine_cosine(CFG)
    assert np.max(np.abs(_window(quantum.commutator(c, num) - 1j * s.entries))) < 1e-12
    assert np.max(np.abs(_window(quantum.commutator(s, num) + 1j * c.entries))) < 1e-12


def test_cosine_sine_commutator_is_ground_projector():
    # with <1|S|0> = i/2 the commutator comes out as +(i/2) |0><0|
    s, c = quantum.build_sine_cosine(CFG)
    target = 0.5j * quantum.ground_projector(CFG)
    assert np.max(np.abs(_window(quantum.commutator(c, s) - target))) < 1e-12


def test_binomial_recurrence_exact():
    exact = Fraction(1)
    for k in range(1, 65):
        exact *= Fraction(-1, 2) - k + 1
        exact /= k
        assert quantum.binom_half(k) == pytest.approx(float(exact), rel=1e-13)


def test_series_coefficients_are_arcsin_series():
    c = quantum.phase_series_coefficients(200)
    # sum_k binom(-1/2,k)(-1)^k/(2k+1) x^(2k+1) = arcsin(x); at x = 1/2 it is pi/6
    x = 0.5
    assert np.sum(c * x ** (2 * np.arange(201) + 1)) == pytest.approx(math.pi / 6, rel=1e-14)


def test_phi_diagonal_exact():
    phi = quantum.build_phi_op(CFG)
    assert np.all(np.diag(phi.trusted) == 0.5 * np.pi)


def test_phi_hermitian_real_spectrum():
    phi = quantum.build_phi_op(CFG)
    assert phi.hermiticity_error() == 0.0
    ev = np.linalg.eigvals(phi.trusted)
    assert np.max(np.abs(ev.imag)) < 1e-12


def test_phi_series_info():
    info = quantum.build_phi_op(CFG).info
    assert info["last_term"] <= CFG.series_tol
    assert 0 < info["tail_bound"] < 0.1


def test_phi_strict_series_tolerance_unmet():
    # the arcsin series at |C| ~ 1 decays like k^-3/2; 1e-10 needs ~10^7 terms
    with pytest.raises(SeriesNotConverged):
        quantum.build_phi_op(FockSpaceConfig(series_tol=1e-10))


def test_phi_exact_kernel_matches_spectral_oracle():
    for k, n in [(1, 0), (3, 0), (2, 1), (4, 4), (7, 2), (2, 0)]:
        assert quantum.phi_exact_element(k, n) == pytest.approx(
            oracles.phi_element_spectral(k, n, 8000), abs=1e-12)


def test_phi_ground_coupling_converges():
    first = quantum.phi_element_series(1, 0, 0)
    assert first == pytest.approx(-0.5, rel=1e-15)
    a = quantum.phi_element_series(1, 0, 8192)
    b = quantum.phi_element_series(1, 0, 16384)
    assert abs(a - b) < 1e-8
    assert b == pytest.approx(quantum.phi_exact_element(1, 0), abs=1e-8)


def test_phi_matrix_matches_series_route():
    phi = quantum.build_phi_op(CFG)
    for k, n in [(1, 0), (5, 2), (40, 3)]:
        assert phi[k, n] == pytest.approx(quantum.phi_element_series(k, n, CFG.series_k_max),
                                          abs=1e-14)


def test_phi_matrix_within_tail_bound_of_exact():
    phi = quantum.build_phi_op(CFG)
    bound = phi.info["tail_bound"]
    for k, n in [(1, 0), (3, 0), (10, 5)]:
        assert abs(phi[k, n] - quantum.phi_exact_element(k, n)) <= bound


@pytest.mark.parametrize("op", ["K_o", "J", "S", "C", "phi", "K_I"])
def test_hermiticity(op):
    build = {
        "K_o": lambda: quantum.build_k_free(CFG, P),
        "J": lambda: quantum.build_j_op(CFG, P),
        "S": lambda: quantum.build_sine_cosine(CFG)[0],
        "C": lambda: quantum.build_sine_cosine(CFG)[1],
        "phi": lambda: quantum.build_phi_op(CFG),
        "K_I": lambda: quantum.build_k_interaction(CFG, P),
    }[op]
    assert build().hermiticity_error() <= 1e-12


def test_full_constant_hermitian():
    k = quantum.full_constant(CFG, P)
    assert np.max(np.abs(k - k.conj().T)) == 0.0


def test_interaction_vanishes_without_damping():
    assert not np.any(quantum.build_k_interaction(CFG, SHO).entries)


def test_interaction_diagonal():
    d = np.real(np.diag(quantum.build_k_interaction(CFG, P).trusted))
    n = np.arange(CFG.trusted_window)
    assert np.allclose(d, -0.001 * math.pi * (n + 0.5), rtol=1e-13, atol=0)


def test_interaction_two_step_elements():
    k_i = quantum.build_k_interaction(CFG, P)
    for n in range(10):
        expected = 0.001 / 12 * (6 * n + 9)
        assert abs(k_i[n + 2, n]) == pytest.approx(expected, rel=1e-12)
        assert k_i[n + 2, n].real == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 20), st.floats(1e-4, 0.05), st.floats(0.5, 3.0))
def test_first_order_identity(n, wa, hbar):
    p = OscillatorParams(omega_alpha=wa, hbar=hbar)
    shift = quantum.first_order_shift(n, SMALL, p)
    assert shift == pytest.approx(-hbar * wa * math.pi * (n + 0.5), rel=1e-12)


def test_first_order_examples():
    assert quantum.first_order_shift(0, CFG, P) == pytest.approx(-1.5708e-3, rel=1e-4)
    assert quantum.first_order_shift(1, CFG, P) == pytest.approx(-4.7124e-3, rel=1e-4)
    assert quantum.first_order_shift(3, CFG, SHO) == 0.0


def test_outside_window():
    with pytest.raises(OutsideTrustedWindow):
        quantum.first_order_shift(CFG.trusted_window, CFG, P)
    with pytest.raises(OutsideTrustedWindow):
        quantum.second_order_shift_sum(-1, CFG, P)
    with pytest.raises(OutsideTrustedWindow):
        quantum.matrix_element_closed_form(0, 500, CFG, P)


def test_shifted_frequency():
    assert quantum.shifted_frequency(P) == pytest.approx(0.9968584, abs=1e-7)
    assert quantum.shifted_frequency(SHO) == 1.0


def test_first_order_spacing():
    e1 = [0.5 + n + quantum.first_order_shift(n, CFG, P) for n in range(30)]
    assert np.allclose(np.diff(e1), quantum.shifted_frequency(P), rtol=1e-12)


def test_closed_form_elements():
    assert quantum.matrix_element_closed_form(2, 0, CFG, P) == pytest.approx(7.5e-4, rel=1e-14)
    assert quantum.matrix_element_closed_form(3, 3, CFG, P) == 0.0


def test_closed_form_table_reports_deviations():
    rows = quantum.matrix_element_table(CFG, P, size=6)
    assert len(rows) == 36
    by_index = {(k, n): r for k, n, *r in rows}
    # modulus agrees two steps up, the phase i is absent from the closed form
    _, _, diff, mod_diff = by_index[(2, 0)]
    assert mod_diff < 1e-15 and diff > 1e-4


def test_second_order_ground_regression():
    assert quantum.second_order_shift_sum(0, CFG, P) == pytest.approx(DE2_GROUND, rel=1e-12)


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_second_order_against_curvature_oracle(n):
    unit = OscillatorParams(omega_alpha=1.0)
    h0 = quantum.build_k_free(CFG, unit).entries
    v = quantum.build_k_interaction(CFG, unit).entries
    oracle = oracles.second_order_by_curvature(h0, v, n) * 0.001**2
    assert quantum.second_order_shift_sum(n, CFG, P) == pytest.approx(oracle, rel=1e-7)


def test_second_order_quadratic():
    p2 = OscillatorParams(omega_alpha=0.002)
    for n in range(6):
        a = quantum.second_order_shift_sum(n, CFG, P)
        b = quantum.second_order_shift_sum(n, CFG, p2)
        assert b / a == pytest.approx(4.0, rel=1e-6)
    assert quantum.second_order_shift_sum(0, CFG, SHO) == 0.0


def test_second_order_tail_is_small():
    tail = quantum.second_order_tail_estimate(0, CFG, P)
    assert 0 < tail < 1e-6 * abs(DE2_GROUND)


def test_second_order_closed_form_scaling():
    a = quantum.second_order_closed_form(0, CFG, P)
    b = quantum.second_order_closed_form(0, CFG, OscillatorParams(omega_alpha=0.002))
    assert b / a == pytest.approx(4.0, rel=1e-12)
    assert quantum.second_order_closed_form(0, CFG, SHO) == 0.0


def test_diagonalize_no_damping():
    r = quantum.diagonalize_k(SMALL, SHO, levels=10)
    assert np.array_equal(r.e_diag, 0.5 + np.arange(10))
    assert not np.any(r.de1) and not np.any(r.de2)


def test_diagonalize_ground_level():
    r = quantum.diagonalize_k(CFG, P, levels=6)
    assert r.e_diag[0] == pytest.approx(0.5 - 1.5708e-3 + DE2_GROUND, abs=1e-7)
    assert abs(r.e_diag[0] - r.e_pert[0]) < 1e-8
    assert r.stable and r.max_rel_change < quantum.STABILITY_TOL
    assert np.allclose(np.diff(r.e_diag), quantum.shifted_frequency(P), rtol=1e-5)


def test_third_order_ratio():
    r1 = quantum.diagonalize_k(CFG, P, levels=6, check_stability=False)
    r2 = quantum.diagonalize_k(CFG, OscillatorParams(omega_alpha=0.002), levels=6,
                               check_stability=False)
    ratio = (r2.e_diag - r2.e_pert) / (r1.e_diag - r1.e_pert)
    assert np.all(np.abs(ratio - 8) < 1.6)


def test_truncation_unstable(monkeypatch):
    monkeypatch.setattr(quantum, "STABILITY_TOL", 0.0)
    with pytest.raises(TruncationUnstable) as info:
        quantum.diagonalize_k(SMALL, P, levels=5)
    assert info.value.report is not None and not info.value.report.stable
    report = quantum.diagonalize_k(SMALL, P, levels=5, strict=False)
    assert not report.stable


def test_report_rows_match_columns():
    r = quantum.diagonalize_k(SMALL, P, levels=4)
    rows = list(r.rows())
    assert len(rows) == 4 and all(len(row) == len(r.COLUMNS) for row in rows)


def test_levels_outside_window():
    with pytest.raises(OutsideTrustedWindow):
        quantum.diagonalize_k(SMALL, P, levels=SMALL.trusted_window + 1)
