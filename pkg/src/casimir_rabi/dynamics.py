"""Closed-system fidelity, two-level predictions and a Lindblad reference."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .fock import (
    LEAKAGE_WARN,
    FockSpace,
    SpectralPropagator,
    annihilation_cavity,
    annihilation_mech,
    leakage_report,
    warn_if_leaking,
)
from .model import ModelParams, build_effective, build_exact, build_rotating, effective_rabi

__all__ = [
    "FidelityTrace",
    "LindbladTrace",
    "LindbladStepError",
    "fidelity_trace",
    "two_level_expectations",
    "frame_hamiltonian",
    "check_density",
    "lindblad_evolve",
    "write_fidelity_csv",
    "write_expectation_csv",
]

FRAMES = ("exact", "effective", "rotating")


class LindbladStepError(RuntimeError):
    pass


@dataclass(frozen=True)
class FidelityTrace:
    times: np.ndarray
    fidelity: np.ndarray
    params: ModelParams
    leakage: dict = field(default_factory=dict)

    @property
    def min_fidelity(self) -> float:
        return float(self.fidelity.min())


def fidelity_trace(
    p: ModelParams,
    space: FockSpace,
    psi0: np.ndarray,
    t_final: float,
    n_samples: int,
    chunk: int = 4096,
) -> FidelityTrace:
    """Overlap between exact and effective evolutions of the same initial state.

    ``F(t) = |<phi(t)|psi(t)>|^2`` with ``phi`` evolved by the exact and
    ``psi`` by the effective Hamiltonian, both by one spectral application
    per sample time.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.vdot(psi0, psi0).real - 1) > 1e-10:
        raise ValueError("psi0 must be normalized")
    exact = SpectralPropagator(build_exact(p, space), hermitian=True)
    eff = SpectralPropagator(build_effective(p, space), hermitian=True)
    times = np.linspace(0.0, t_final, n_samples)
    F = np.empty(n_samples)
    leak = {"top_photon_level": 0.0, "top_phonon_level": 0.0}
    for s in range(0, n_samples, chunk):
        ts = times[s : s + chunk]
        phi = exact.apply(psi0, ts)
        psi = eff.apply(psi0, ts)
        F[s : s + chunk] = np.abs(np.einsum("ij,ij->j", phi.conj(), psi)) ** 2
        for states in (phi, psi):
            rep = leakage_report(space, states, warn=False)
            for key in leak:
                leak[key] = max(leak[key], rep[key])
    warn_if_leaking({**leak, "threshold": LEAKAGE_WARN})
    return FidelityTrace(times, F, p, leak)


def two_level_expectations(p: ModelParams, t):
    """Photon and phonon numbers ``(2 sin^2(Omega t), 3 cos^2(Omega t))``.

    Valid on resonance, for the normalized no-jump state started in |0,3>.
    """
    phase = effective_rabi(p) * np.asarray(t, dtype=float)
    return 2 * np.sin(phase) ** 2, 3 * np.cos(phase) ** 2


def frame_hamiltonian(p: ModelParams, space: FockSpace, frame: str) -> np.ndarray:
    """Hermitian Hamiltonian of an engine frame (no loss terms)."""
    if frame == "exact":
        return build_exact(p, space)
    if frame == "effective":
        return build_effective(p, space)
    if frame == "rotating":
        return build_rotating(p, space, dissipative=False)
    raise ValueError(f"unknown frame {frame!r}; expected one of {FRAMES}")


def check_density(rho: np.ndarray, tol: float = 1e-8) -> None:
    rho = np.asarray(rho)
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1) > tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real} != 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise ValueError("density matrix has negative eigenvalues")


@dataclass(frozen=True)
class LindbladTrace:
    times: np.ndarray
    n_photon: np.ndarray
    n_phonon: np.ndarray
    trace: np.ndarray
    rho_final: np.ndarray
    frame: str


def lindblad_evolve(
    p: ModelParams,
    space: FockSpace,
    rho0: np.ndarray,
    t_final: float,
    n_steps: int,
    frame: str = "exact",
    record_every: int = 1,
    trace_tol: float = 1e-7,
) -> LindbladTrace:
    """Fixed-step RK4 integration of the master equation with photon and phonon loss.

    ``d rho/dt = -i[H, rho] + gamma_a D[a] rho + gamma_b D[b] rho``. ``frame``
    selects ``H``: the exact Hamiltonian, the effective one, or the
    effective one in the rotating frame (for horizons set by the loss rates).
    """
    check_density(rho0)
    H = frame_hamiltonian(p, space, frame)
    a, b = annihilation_cavity(space), annihilation_mech(space)
    jumps = [np.sqrt(p.gamma_a) * a, np.sqrt(p.gamma_b) * b]
    jumps = [C for C, rate in zip(jumps, (p.gamma_a, p.gamma_b)) if rate > 0]
    Hnh = H - 0.5j * sum((C.conj().T @ C for C in jumps), np.zeros_like(H))
    Hnh_dag = Hnh.conj().T
    h = t_final / n_steps

    w = np.linalg.eigvalsh(H)
    rate_max = (max(p.gamma_a, p.gamma_b) * max(space.n_cav, space.n_mech))
    spread = (w[-1] - w[0]) + rate_max
    if h * spread > 2.5:
        raise LindbladStepError(
            f"step {h:.3g} unstable for spectral spread {spread:.3g}; "
            f"use n_steps >= {int(np.ceil(t_final * spread))}"
        )

    def rhs(rho):
        out = -1j * (Hnh @ rho - rho @ Hnh_dag)
        for C in jumps:
            out += C @ rho @ C.conj().T
        return out

    na = space.photon_numbers()
    nb = space.phonon_numbers()
    rho = np.array(rho0, dtype=complex)
    times, n_ph, n_pn, tr = [], [], [], []

    def record(t, rho):
        d = np.real(np.diag(rho))
        if not np.all(np.isfinite(d)) or d.min() < -1e-6 or d.max() > 1 + 1e-6:
            raise LindbladStepError(
                f"populations left [0, 1] at t={t:.4g}; increase n_steps (try {2 * n_steps})"
            )
        times.append(t)
        n_ph.append(float(d @ na))
        n_pn.append(float(d @ nb))
        tr.append(float(d.sum()))

    record(0.0, rho)
    for step in range(1, n_steps + 1):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * h * k1)
        k3 = rhs(rho + 0.5 * h * k2)
        k4 = rhs(rho + h * k3)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if step % record_every == 0 or step == n_steps:
            record(step * h, rho)
            if not np.isfinite(tr[-1]) or abs(tr[-1] - 1) > trace_tol:
                raise LindbladStepError(
                    f"trace drifted to {tr[-1]:.10g} at t={step * h:.4g}; "
                    f"increase n_steps (try {2 * n_steps})"
                )
    return LindbladTrace(
        np.asarray(times), np.asarray(n_ph), np.asarray(n_pn), np.asarray(tr), rho, frame
    )


def write_fidelity_csv(trace: FidelityTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "F"])
        for t, f in zip(trace.times, trace.fidelity):
            w.writerow([repr(float(t)), repr(float(f))])


def write_expectation_csv(times, n_photon, n_phonon, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "n_photon", "n_phonon"])
        for row in zip(times, n_photon, n_phonon):
            w.writerow([repr(float(x)) for x in row])
