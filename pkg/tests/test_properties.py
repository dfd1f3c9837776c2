"""Randomized invariants: hypothesis strategies plus a fixed block of 20+ seeds."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casimir_rabi.emission import classify, classify_one
from casimir_rabi.fock import FockSpace, SpectralPropagator, check_hermitian, hermitian_eig
from casimir_rabi.mcwf import JumpEngine, run_trajectory
from casimir_rabi.model import (
    ModelParams,
    build_effective,
    build_exact,
    effective_rabi,
    resonant_omega_c,
    two_level_matrix,
)
from casimir_rabi.qfi import qfi_exact

SEEDS = range(24)
SMALL = FockSpace(3, 5)

couplings = st.floats(1e-5, 1e-2)
omegas = st.floats(1.2, 1.8)
rates = st.floats(0.0, 2.0)


@settings(max_examples=40, deadline=None)
@given(omega_c=omegas, g=st.floats(0.0, 0.3))
def test_exact_hamiltonian_hermitian(omega_c, g):
    H = build_exact(ModelParams(omega_c, g), SMALL)
    assert check_hermitian(H) <= 1e-12 * max(1.0, np.abs(H).max())


@settings(max_examples=40, deadline=None)
@given(g=couplings)
def test_resonant_splitting_is_twice_rabi(g):
    p = ModelParams.resonant(g)
    w, _ = hermitian_eig(two_level_matrix(p))
    assert w[1] - w[0] == pytest.approx(2 * effective_rabi(p), rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(g=couplings, omega_c=omegas)
def test_effective_conserves_excitation_pattern(g, omega_c):
    # the effective model only couples states with equal 2 a^+a + 3 b^+b
    H = build_effective(ModelParams(omega_c, g), SMALL)
    q = 3 * SMALL.photon_numbers() + 2 * SMALL.phonon_numbers()
    off = np.abs(H) * (q[:, None] != q[None, :])
    assert off.max() == 0


@settings(max_examples=30, deadline=None)
@given(g=couplings, ga=rates, gb=rates, t=st.floats(0.0, 50.0))
def test_no_jump_norm_never_grows(g, ga, gb, t):
    p = ModelParams(resonant_omega_c(ModelParams(1.5, g)), g, ga, gb)
    eng = JumpEngine(p, SMALL)
    psi = (SMALL.ket(0, 3) + SMALL.ket(2, 0)) / np.sqrt(2)
    states = eng.evolve(psi, eng.coefficients(psi), np.linspace(0, t, 20))
    norm = eng.populations(states)[0]
    assert np.all(np.diff(norm) <= 1e-12) and norm.max() <= 1 + 1e-12


@settings(max_examples=25, deadline=None)
@given(g=st.floats(0.0, 0.05), t=st.floats(0.0, 200.0), phase=st.floats(0, 2 * np.pi))
def test_qfi_nonnegative_and_phase_free(g, t, phase):
    p = ModelParams(1.5, g)
    psi = (SMALL.ket(0, 3) + np.exp(1j * phase) * SMALL.ket(1, 1)) / np.sqrt(2)
    F = qfi_exact(p, SMALL, psi, t)
    assert F >= -1e-9 * max(1.0, t * t)
    assert qfi_exact(p, SMALL, np.exp(1j * phase) * psi, t) == pytest.approx(F, rel=1e-9, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(t1=st.floats(0.0, 30.0), t2=st.floats(0.0, 30.0))
def test_spectral_propagator_semigroup(t1, t2):
    H = build_exact(ModelParams(1.5, 0.05), SMALL)
    prop = SpectralPropagator(H)
    psi = SMALL.ket(0, 3)
    a = prop.apply(prop.apply(psi, t1), t2)
    assert np.allclose(a, prop.apply(psi, t1 + t2), atol=1e-9)


@pytest.mark.parametrize("seed", SEEDS)
def test_trajectory_invariants(seed):
    # g = 0 conserves quanta; every jump removes exactly one
    p = ModelParams(1.5, 0.0, gamma_a=0.7, gamma_b=0.4)
    r = run_trajectory(p, SMALL, SMALL.ket(2, 3), 60.0, 0.01, seed=seed, record_every=100)
    times = [j.time for j in r.jumps]
    assert np.all(np.diff(times) > 0) and all(0 < t <= 60.0 for t in times)
    ch = [j.channel for j in r.jumps]
    assert ch.count("cavity") <= 2 and ch.count("mechanical") <= 3
    assert np.all(np.diff(r.n_photon) <= 1e-12) and np.all(np.diff(r.n_phonon) <= 1e-12)
    n_ph = [j.n_photon for j in r.jumps if j.channel == "cavity"]
    n_pn = [j.n_phonon for j in r.jumps if j.channel == "mechanical"]
    assert n_ph == pytest.approx([2, 1][: len(n_ph)])
    assert n_pn == pytest.approx([3, 2, 1][: len(n_pn)])


@pytest.mark.parametrize("seed", SEEDS)
def test_classification_consistent(seed):
    p = ModelParams(1.5, 0.0, gamma_a=0.7, gamma_b=0.4)
    recs = [run_trajectory(p, SMALL, SMALL.ket(1, 3), 60.0, 0.01, seed=seed, index=i, record_every=10**6)
            for i in range(8)]
    s = classify(recs)
    assert s.counts["PtBE"] + s.counts["PnBE"] + s.unclassified == s.n_traj
    for r in recs:
        f = classify_one(r)
        assert not f["3PnBE"] or f["2PnBE"]
    assert s.counts["2PtBE"] == 0  # one photon cannot form a pair
    for ch, (edges, counts) in s.histograms.items():
        assert counts.sum() == s.counts["PtBE" if ch == "cavity" else "PnBE"]
