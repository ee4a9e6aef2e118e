import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kicqed import units
from kicqed.circuit import circuit_modes, load_device
from kicqed.errors import LabelingFailed, TruncationOverflow
from kicqed.fock import (
    FockConfig,
    ModeParams,
    build_hamiltonian,
    compare_models,
    cosine_argument,
    diagonalize_and_label,
    dispersive_shift,
    flux_matrix_element,
    flux_sweep,
    fold_flux,
    inductive_t1,
    q_ind_from_t1,
    solve,
    transitions,
)

from .oracles import cos_by_scaled_taylor, hamiltonian_by_taylor, taylor_cos

SMALL = FockConfig(nR=6, nQ=14, guard_R=2, guard_Q=4)


@pytest.fixture(scope="module")
def q7_modes(q7):
    return circuit_modes(q7)


# --- config ------------------------------------------------------------------

def test_config_limits():
    with pytest.raises(ValueError):
        FockConfig(nR=1)
    with pytest.raises(TruncationOverflow):
        FockConfig(nR=101, nQ=100)
    assert FockConfig().kept == (9, 19)
    assert FockConfig().dim == 450


# --- Hamiltonian -------------------------------------------------------------

def test_harmonic_limit():
    m = ModeParams(f_R=7.0, f_Q=3.3, lambda_R=0.1, lambda_Q=0.9)
    H = build_hamiltonian(m, 0.0, 0.3, SMALL)
    nr, nq = np.divmod(np.arange(SMALL.dim), SMALL.nQ)
    np.testing.assert_allclose(H, np.diag(7.0 * (nr + 0.5) + 3.3 * (nq + 0.5)), atol=1e-13)


def test_uncoupled_zero_flux():
    m = ModeParams(f_R=7.0, f_Q=3.3, lambda_R=0.0, lambda_Q=0.0)
    H = build_hamiltonian(m, 2.5, 0.0, SMALL)
    H0 = build_hamiltonian(m, 0.0, 0.0, SMALL)
    np.testing.assert_allclose(H, H0 - 2.5 * np.eye(SMALL.dim), atol=1e-13)


@given(
    lr=st.floats(-0.5, 0.5), lq=st.floats(0.05, 3.0), flux=st.floats(-1, 2), EJ=st.floats(0.1, 20)
)
def test_hamiltonian_hermitian(lr, lq, flux, EJ):
    H = build_hamiltonian(ModeParams(7.0, 5.0, lr, lq), EJ, flux, SMALL)
    assert np.abs(H - H.T).max() <= 1e-12 * np.abs(H).max()


@given(lr=st.floats(-1, 1), lq=st.floats(0.05, 2.0), flux=st.floats(0, 1))
def test_cosine_matches_taylor(lr, lq, flux):
    cfg = FockConfig(nR=8, nQ=8, guard_R=0, guard_Q=0)
    m = ModeParams(7.0, 5.0, lr, lq)
    A = cosine_argument(m, flux, cfg)
    A *= 10.0 / np.linalg.norm(A, 2)  # ||A|| = 10
    w, U = np.linalg.eigh(A)
    exact = (U * np.cos(w)) @ U.T
    assert np.abs(exact - taylor_cos(A, order=40)).max() < 1e-8


def test_cos_uses_argument_eigenbasis(q7_modes):
    cfg = FockConfig(nR=5, nQ=9, guard_R=0, guard_Q=0)
    A = cosine_argument(q7_modes, 0.37, cfg)
    w, U = np.linalg.eigh(A)
    H = build_hamiltonian(q7_modes, 1.0, 0.37, cfg)
    H0 = build_hamiltonian(q7_modes, 0.0, 0.37, cfg)
    np.testing.assert_allclose(H0 - H, (U * np.cos(w)) @ U.T, atol=1e-12)


def test_q7_ground_energy_against_taylor_oracle(q7, q7_modes):
    cfg = FockConfig()
    m = ModeParams.of(q7_modes)
    E0 = solve(q7_modes, q7.EJ, 0.5, cfg).energy(0, 0)
    H = hamiltonian_by_taylor(m.f_R, m.f_Q, m.lambda_R, m.lambda_Q, q7.EJ, 0.5, cfg.nR + 5, cfg.nQ + 10)
    ref = np.linalg.eigvalsh(H)[0]
    assert E0 == pytest.approx(ref, abs=1e-7)
    assert E0 == pytest.approx(10.040005221419015, abs=1e-9)


def test_scaled_taylor_oracle_is_accurate():
    A = np.diag([0.0, np.pi, 14.0])
    np.testing.assert_allclose(cos_by_scaled_taylor(A), np.diag(np.cos([0.0, np.pi, 14.0])), atol=1e-12)


# --- labeling ----------------------------------------------------------------

def test_harmonic_labels_are_fock_indices():
    m = ModeParams(f_R=7.1, f_Q=3.3, lambda_R=0.0, lambda_Q=0.0)
    s = diagonalize_and_label(build_hamiltonian(m, 0.0, 0.0, SMALL), SMALL)
    for (nr, nq), e, c in zip(s.labels, s.energies, s.confidence):
        assert e == pytest.approx(7.1 * (nr + 0.5) + 3.3 * (nq + 0.5))
        assert c == pytest.approx(1.0)
    kr, kq = SMALL.kept
    assert len(s.labels) == (kr + 1) * (kq + 1)


def test_labels_unique_and_sorted(q7, q7_modes):
    s = solve(q7_modes, q7.EJ, 0.5)
    assert len({tuple(x) for x in s.labels}) == len(s.labels)
    assert np.all(np.diff(s.energies) >= 0)
    assert tuple(s.labels[0]) == (0, 0)
    kr, kq = FockConfig().kept
    assert s.labels[:, 0].max() <= kr and s.labels[:, 1].max() <= kq
    assert np.all((s.confidence > 0.5) | s.ambiguous)


def test_literal_fock_labels_agree_in_transmon_like_regime():
    # weak nonlinearity: dressed and bare Fock references give the same labels
    m = ModeParams(f_R=7.0, f_Q=5.0, lambda_R=0.02, lambda_Q=0.2)
    H = build_hamiltonian(m, 2.0, 0.0, SMALL)
    a = diagonalize_and_label(H, SMALL)
    b = solve(m, 2.0, 0.0, SMALL)
    assert a.as_tuples()[:6] == pytest.approx(b.as_tuples()[:6])


def test_strict_labeling_failure():
    # resonator and qubit exactly degenerate and strongly hybridized
    m = ModeParams(f_R=5.0, f_Q=5.0, lambda_R=0.6, lambda_Q=0.6)
    H = build_hamiltonian(m, 3.0, 0.25, SMALL)
    with pytest.raises(LabelingFailed):
        diagonalize_and_label(H, SMALL, strict=True)
    s = diagonalize_and_label(H, SMALL, strict=False)
    assert s.ambiguous.any()


def test_avoided_crossing_is_flagged(q6):
    # bisect onto the flux where the dressed fQ01 and fR0 exchange character
    modes = circuit_modes(q6)

    def gap(f):
        r = transitions(modes, q6.EJ, f)
        return r.fQ01 - r.fR0

    lo, hi = 0.36, 0.39
    assert gap(lo) > 0 > gap(hi)
    for _ in range(50):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if gap(mid) > 0 else (lo, mid)
    at = [solve(modes, q6.EJ, f, strict=False) for f in (lo, hi)]
    for s in at:
        assert s.confidence[s._row(0, 1)] == pytest.approx(0.5, abs=0.01)
    assert any(transitions(modes, q6.EJ, f).ambiguous for f in (lo, hi))
    assert not transitions(modes, q6.EJ, 0.5).ambiguous


# --- transitions and chi -----------------------------------------------------

def test_chi_is_fr1_minus_fr0(q7, q7_modes):
    row = transitions(q7_modes, q7.EJ, 0.5)
    assert row.chi_MHz == pytest.approx((row.fR1 - row.fR0) * 1e3, rel=1e-12)
    assert row.chi_MHz == pytest.approx(dispersive_shift(q7, 0.5), rel=1e-12)


def test_decoupled_chi_vanishes(q7):
    s = q7.symmetrized().replace(Dk=0.0)
    assert abs(dispersive_shift(s, 0.5)) < 1e-3


def test_chi_monotone_in_dk(q7):
    s = q7.symmetrized()
    rows = [transitions(circuit_modes(s.replace(Dk=dk)), s.EJ, 0.5) for dk in (0.2, 0.4, 0.6, 0.8, 1.0)]
    assert np.all(np.diff([abs(r.chi_MHz) for r in rows]) > 0)
    # at Dk = 1 nH |1,1> is hybridized beyond the 1/2 confidence line
    assert rows[-1].ambiguous and not rows[0].ambiguous
    with pytest.raises(LabelingFailed):
        dispersive_shift(s.replace(Dk=1.0), 0.5)


def test_q7_fq01_converged_against_larger_truncation(q7, q7_modes):
    small = transitions(q7_modes, q7.EJ, 0.5, FockConfig())
    big = transitions(q7_modes, q7.EJ, 0.5, FockConfig(nR=25, nQ=50))
    assert small.fQ01 == pytest.approx(big.fQ01, rel=1e-3)


@pytest.mark.parametrize("name,expected", [("q3", -1.75), ("q7", 0.98)])
def test_chi_sign_and_size(name, expected):
    chi = dispersive_shift(load_device(name), 0.5)
    assert math.copysign(1, chi) == math.copysign(1, expected)
    assert chi == pytest.approx(expected, rel=0.1)


# --- sweeps ------------------------------------------------------------------

def test_sweep_periodicity_and_mirror(q7, q7_modes):
    rows = flux_sweep(q7, [0.0, 1.0, 0.4, 0.6], modes=q7_modes)
    np.testing.assert_allclose(rows[0].values(), rows[1].values(), rtol=1e-9)
    np.testing.assert_allclose(rows[2].values(), rows[3].values(), rtol=1e-9)


@given(flux=st.floats(-1, 2), lr=st.floats(-0.5, 0.5), lq=st.floats(0.05, 3.0))
@settings(max_examples=20)
def test_unfolded_spectrum_periodic_and_mirrored(flux, lr, lq):
    m = ModeParams(7.0, 5.0, lr, lq)
    E = np.linalg.eigvalsh(build_hamiltonian(m, 5.0, flux, SMALL))
    scale = np.abs(E).max()
    for other in (flux + 1.0, -flux):
        E2 = np.linalg.eigvalsh(build_hamiltonian(m, 5.0, other, SMALL))
        assert np.abs(E2 - E).max() <= 1e-12 * scale


def test_fold_flux():
    assert [fold_flux(f) for f in (0.0, 0.3, 0.7, 1.0, -0.2, 2.5)] == pytest.approx([0.0, 0.3, 0.3, 0.0, 0.2, 0.5])


def test_sweep_threads_identical(q7, q7_modes):
    grid = np.linspace(0, 1, 7)
    a = flux_sweep(q7, grid, SMALL, threads=1, modes=q7_modes)
    b = flux_sweep(q7, grid, SMALL, threads=3, modes=q7_modes)
    assert [r.values().tolist() for r in a] == [r.values().tolist() for r in b]


def test_sweep_rejects_bad_grid(q7):
    with pytest.raises(ValueError):
        flux_sweep(q7, [])
    with pytest.raises(ValueError):
        flux_sweep(q7, [0.1, float("nan")])


def test_sweep_collects_point_errors(q7):
    m = ModeParams(f_R=5.0, f_Q=5.0, lambda_R=0.6, lambda_Q=0.6)
    rows = flux_sweep(q7.replace(EJ=3.0), [0.25, 0.5], SMALL, modes=m)
    assert len(rows) == 2
    assert all(isinstance(r.ambiguous, bool) for r in rows)


def test_q6_sweet_spot_at_half_flux(q6):
    grid = np.linspace(0, 1, 101)
    rows = flux_sweep(q6, grid, FockConfig(nR=8, nQ=30, guard_R=3, guard_Q=10))
    fq = np.array([r.fQ01 for r in rows])
    assert abs(grid[int(np.nanargmin(fq))] - 0.5) <= 0.01 + 1e-12


# --- matrix element and T1 ---------------------------------------------------

def test_matrix_element_harmonic():
    m = ModeParams(f_R=7.0, f_Q=4.0, lambda_R=0.0, lambda_Q=0.8)
    from kicqed.fock import flux_operator

    s = solve(m, 1e-12, 0.0, SMALL)
    val = abs(s.state(0, 0) @ flux_operator(m, SMALL) @ s.state(0, 1))
    assert val == pytest.approx(0.8 / (2 * np.pi), rel=1e-9)


def test_matrix_element_flux_symmetry(q7, q7_modes):
    a = flux_matrix_element(q7, 0.4, modes=q7_modes)
    b = flux_matrix_element(q7, 0.6, modes=q7_modes)
    assert a == pytest.approx(b, rel=1e-6)


def test_q7_matrix_element_converged(q7, q7_modes):
    a = flux_matrix_element(q7, 0.5, FockConfig(), modes=q7_modes)
    b = flux_matrix_element(q7, 0.5, FockConfig(nR=25, nQ=50), modes=q7_modes)
    assert a == pytest.approx(b, rel=1e-4)
    assert a == pytest.approx(0.19015567862, rel=1e-6)


@given(
    T1=st.floats(1e-7, 1e-3), EL=st.floats(0.5, 20), matel=st.floats(0.01, 1), fq=st.floats(0.05, 10),
    T=st.floats(0.0, 0.1),
)
def test_t1_round_trip(T1, EL, matel, fq, T):
    Q = q_ind_from_t1(T1, EL, matel, fq, T)
    assert inductive_t1(EL, Q, matel, fq, T) == pytest.approx(T1, rel=1e-12)


def test_t1_zero_temperature_limit():
    EL, Q, m, fq = 4.0, 5e5, 0.2, 1.0
    rate = 8 * math.pi**3 * EL * units.GHz / Q * m**2 * 2
    assert 1 / inductive_t1(EL, Q, m, fq, T=0.0) == pytest.approx(rate, rel=1e-12)
    assert 1 / inductive_t1(EL, Q, m, fq, T=1e-6) == pytest.approx(rate, rel=1e-12)
    assert inductive_t1(EL, Q, m, fq, T=0.05) < inductive_t1(EL, Q, m, fq, T=0.0)


def test_t1_rejects_bad_inputs():
    with pytest.raises(ValueError):
        inductive_t1(-1, 1e5, 0.1, 1.0)
    with pytest.raises(ValueError):
        q_ind_from_t1(1e-6, 1.0, 0.1, 1.0, T=-0.01)


# --- model comparison --------------------------------------------------------

def test_compare_models_rows(q7):
    rows = compare_models(q7.symmetrized().without_node4(), [-0.5, 0.0, 0.5], cfg=SMALL)
    assert [r.Dk for r in rows] == [-0.5, 0.0, 0.5]
    for r in rows:
        assert r.fR_ideal == pytest.approx(r.fR_ext, rel=1e-3)


def test_node4_capacitance_shifts_idealized_agreement(q7):
    # with the center island's capacitances left in, the reduction is only approximate
    r = compare_models(q7.symmetrized(), [0.5], cfg=FockConfig())[0]
    assert abs(r.chi_ideal / r.chi_ext - 1) > 0.01
    assert abs(r.fR_ideal / r.fR_ext - 1) < 0.05
