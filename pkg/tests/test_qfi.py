import json

import numpy as np
import pytest

from casimir_rabi.fock import FockSpace
from casimir_rabi.model import ModelParams
from casimir_rabi.qfi import (
    RichardsonError,
    locate_peak,
    qfi_at,
    qfi_exact,
    qfi_from_states,
    qfi_scan,
    rabi_half_period,
    write_peak_json,
    write_qfi_csv,
)

from oracles import G, HALF_RABI_TIME, OMEGA_EFF, RESONANT_OMEGA_C

SPACE = FockSpace(6, 8)
SMALL = FockSpace(3, 4)


def test_half_period():
    assert rabi_half_period(ModelParams(1.5, G)) == pytest.approx(HALF_RABI_TIME, rel=1e-12)


def test_from_states_ignores_parallel_component():
    phi = np.array([1.0, 0.0], dtype=complex)
    assert qfi_from_states(phi, 0.3j * phi) == pytest.approx(0.0, abs=1e-15)
    assert qfi_from_states(phi, np.array([0, 0.5])) == pytest.approx(1.0)


class TestControls:
    def test_no_photons_no_information(self):
        # g = 0 and |0,3>: the state never depends on omega_c
        p = ModelParams(1.5, 0.0)
        assert qfi_exact(p, SMALL, SMALL.ket(0, 3), 50.0) == pytest.approx(0.0, abs=1e-12)
        assert abs(qfi_at(p, SMALL, SMALL.ket(0, 3), 50.0, delta=1e-5)) <= 1e-6

    def test_photon_superposition(self):
        # g = 0: F = 4 t^2 Var(n) = t^2 for (|0,0> + |1,0>)/sqrt 2
        p = ModelParams(1.5, 0.0)
        psi0 = (SMALL.ket(0, 0) + SMALL.ket(1, 0)) / np.sqrt(2)
        t = 7.0
        assert qfi_exact(p, SMALL, psi0, t) == pytest.approx(t**2, rel=1e-12)
        assert qfi_at(p, SMALL, psi0, t, delta=1e-5) == pytest.approx(t**2, rel=1e-8)


class TestConsistency:
    def test_fd_matches_exact_near_resonance(self):
        p = ModelParams(RESONANT_OMEGA_C + 0.3 * OMEGA_EFF, G)
        fd = qfi_at(p, SPACE, SPACE.ket(0, 3), HALF_RABI_TIME)
        ex = qfi_exact(p, SPACE, SPACE.ket(0, 3), HALF_RABI_TIME)
        assert fd == pytest.approx(ex, rel=0.01)

    def test_global_phase_invariance(self):
        p = ModelParams(RESONANT_OMEGA_C, 0.01)
        psi = (SMALL.ket(0, 3) + 1j * SMALL.ket(2, 0)) / np.sqrt(2)
        a = qfi_exact(p, SMALL, psi, 1e3)
        b = qfi_exact(p, SMALL, np.exp(0.7j) * psi, 1e3)
        assert a == pytest.approx(b, rel=1e-12)
        assert qfi_at(p, SMALL, psi, 1e3, delta=1e-7) == pytest.approx(
            qfi_at(p, SMALL, np.exp(0.7j) * psi, 1e3, delta=1e-7), rel=1e-6)

    def test_richardson_check(self):
        # round-off in exp(-i E t_f) swamps a step this small
        p = ModelParams(RESONANT_OMEGA_C, G)
        with pytest.raises(RichardsonError, match="ill-conditioned"):
            qfi_at(p, SPACE, SPACE.ket(0, 3), HALF_RABI_TIME, delta=1e-13)
        with pytest.raises(RichardsonError, match="resolution"):
            qfi_at(p, SPACE, SPACE.ket(0, 3), HALF_RABI_TIME, delta=1e-17)

    def test_bad_inputs(self):
        p = ModelParams(1.5, G)
        with pytest.raises(ValueError):
            qfi_at(p, SMALL, 2 * SMALL.ket(0, 3), 1.0)
        with pytest.raises(ValueError):
            qfi_at(p, SMALL, SMALL.ket(0, 3), 1.0, delta=0.0)
        with pytest.raises(ValueError):
            qfi_scan(p, SMALL, (1.4, 1.6), 3, 1.0, method="spline")


@pytest.fixture(scope="module")
def peak():
    return locate_peak(ModelParams(1.5, G), SPACE, method="exact")


class TestScan:
    def test_peak_near_resonance(self, peak):
        w, F, scans = peak
        assert abs(w - RESONANT_OMEGA_C) <= 2 * OMEGA_EFF
        assert scans[0].peak_to_edge(F) > 10
        assert scans[-1].omega_c[1] - scans[-1].omega_c[0] <= OMEGA_EFF / 20

    def test_fd_and_exact_scans_agree(self):
        p = ModelParams(1.5, G)
        rng = (RESONANT_OMEGA_C - 3 * OMEGA_EFF, RESONANT_OMEGA_C + 3 * OMEGA_EFF)
        a = qfi_scan(p, SPACE, rng, 7, HALF_RABI_TIME)
        b = qfi_scan(p, SPACE, rng, 7, HALF_RABI_TIME, method="exact", workers=2)
        assert np.allclose(a.F, b.F, rtol=0.01)

    def test_edge_peak_rejected(self):
        p = ModelParams(1.5, G)
        s = qfi_scan(p, SPACE, (RESONANT_OMEGA_C, RESONANT_OMEGA_C + 5e-5), 5, HALF_RABI_TIME, method="exact")
        with pytest.raises(ValueError, match="edge"):
            s.peak()

    def test_writers(self, tmp_path, peak):
        w, F, scans = peak
        write_qfi_csv(scans[0], tmp_path / "q.csv")
        lines = open(tmp_path / "q.csv").read().splitlines()
        assert lines[0] == "omega_c,F" and len(lines) == 202
        write_peak_json(w, F, scans[0], tmp_path / "p.json")
        d = json.load(open(tmp_path / "p.json"))
        assert d["omega_c_peak"] == w and d["n_samples"] == 201
