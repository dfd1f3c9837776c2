"""Hamiltonians of the single-mode cavity with a vibrating mirror.

All frequencies and rates are in units of the mechanical frequency, so
``omega_m == 1`` throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .fock import FockSpace, annihilation_cavity, annihilation_mech, check_hermitian

__all__ = [
    "OMEGA_M",
    "WEAK_COUPLING_MAX",
    "ModelParams",
    "WeakCouplingError",
    "build_exact",
    "build_effective",
    "build_nonhermitian",
    "build_rotating",
    "rotating_frequency",
    "interaction_terms",
    "effective_rabi",
    "resonant_omega_c",
    "two_level_matrix",
]

OMEGA_M = 1.0
WEAK_COUPLING_MAX = 0.01


class WeakCouplingError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Cavity frequency, coupling and loss rates in units of ``omega_m``."""

    omega_c: float
    g: float
    gamma_a: float = 0.0
    gamma_b: float = 0.0

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be positive, got {self.omega_c}")
        if self.g < 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        if self.gamma_a < 0 or self.gamma_b < 0:
            raise ValueError("loss rates must be non-negative")

    @property
    def omega_m(self) -> float:
        return OMEGA_M

    @property
    def detuning(self) -> float:
        return self.omega_c - self.omega_m

    @property
    def weak_coupling(self) -> bool:
        return self.g / self.omega_m <= WEAK_COUPLING_MAX

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @classmethod
    def resonant(cls, g: float, gamma_a: float = 0.0, gamma_b: float = 0.0) -> "ModelParams":
        """Parameters with ``omega_c`` on the |0,3> <-> |2,0> resonance."""
        return cls(omega_c=_resonant_ratio(g) * OMEGA_M, g=g, gamma_a=gamma_a, gamma_b=gamma_b)


def _require_weak(p: ModelParams) -> None:
    if not p.weak_coupling:
        raise WeakCouplingError(
            f"g/omega_m = {p.g / p.omega_m:.3g} exceeds {WEAK_COUPLING_MAX}; "
            "the effective Hamiltonian is not valid here"
        )


def _resonant_ratio(g: float) -> float:
    return 1.5 + 10.5 * (g / OMEGA_M) ** 2


def build_exact(p: ModelParams, space: FockSpace) -> np.ndarray:
    """``omega_c a^+a + omega_m b^+b + g (a^+ + a)^2 (b^+ + b)``."""
    a = annihilation_cavity(space)
    b = annihilation_mech(space)
    x = a + a.conj().T
    y = b + b.conj().T
    H = p.omega_c * (a.conj().T @ a) + p.omega_m * (b.conj().T @ b) + p.g * (x @ x @ y)
    check_hermitian(H)
    return H


def build_effective(p: ModelParams, space: FockSpace) -> np.ndarray:
    """Second plus third order effective Hamiltonian of the exact model.

    The second-order part shifts levels; the third-order part
    ``9 g^3 (a^+2 b^3 + a^2 b^+3)`` drives |0,3> <-> |2,0>.
    """
    _require_weak(p)
    a = annihilation_cavity(space)
    b = annihilation_mech(space)
    ad, bd = a.conj().T, b.conj().T
    na, nb = ad @ a, bd @ b
    one = space.identity()
    wm = p.omega_m
    h2 = (p.g**2 / (4 * wm)) * (ad @ ad @ a @ a - 2 * (2 * na + one) @ (3 * nb + 4 * na + 3 * one))
    h3 = (9 * p.g**3 / wm**2) * (ad @ ad @ b @ b @ b + a @ a @ bd @ bd @ bd)
    H = p.omega_c * na + wm * nb + h2 + h3
    check_hermitian(H)
    return H


def _decay(p: ModelParams, space: FockSpace) -> np.ndarray:
    return np.diag(p.gamma_a * space.photon_numbers() + p.gamma_b * space.phonon_numbers()).astype(complex)


def build_nonhermitian(p: ModelParams, space: FockSpace, use_effective: bool = False) -> np.ndarray:
    """No-jump Hamiltonian ``H - i (gamma_a a^+a + gamma_b b^+b) / 2``."""
    H = build_effective(p, space) if use_effective else build_exact(p, space)
    return H - 0.5j * _decay(p, space)


def rotating_frequency(p: ModelParams) -> float:
    """Frame frequency per unit of the conserved number ``3 a^+a + 2 b^+b``.

    Chosen so that |0,3> has zero diagonal energy in the rotating frame;
    at resonance |2,0> then does too.
    """
    _require_weak(p)
    return (3 * p.omega_m - 6 * p.g**2 / p.omega_m) / 6


def build_rotating(p: ModelParams, space: FockSpace, dissipative: bool = True) -> np.ndarray:
    """Effective Hamiltonian in the frame rotating with ``3 a^+a + 2 b^+b``.

    The effective Hamiltonian conserves ``N = 3 a^+a + 2 b^+b``, and ``N``
    commutes with both number operators, so removing ``nu * N`` changes
    neither the no-jump norm nor any number-diagonal expectation. Only the
    slow scales (Rabi frequency, detuning from resonance, loss rates) remain.
    """
    nu = rotating_frequency(p)
    N = np.diag(3 * space.photon_numbers() + 2 * space.phonon_numbers()).astype(complex)
    H = build_effective(p, space) - nu * N
    if dissipative:
        H = H - 0.5j * _decay(p, space)
    return H


def interaction_terms(p: ModelParams, space: FockSpace) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(g a^+2 b, g a^+2 b^+, g (2 a^+a + 1) b^+)``.

    Together with their adjoints these sum to the coupling term of the
    exact Hamiltonian, up to the cutoff rows of the truncated ladders.
    """
    a = annihilation_cavity(space)
    b = annihilation_mech(space)
    ad, bd = a.conj().T, b.conj().T
    h1 = p.g * ad @ ad @ b
    h2 = p.g * ad @ ad @ bd
    h3 = p.g * (2 * ad @ a + space.identity()) @ bd
    return h1, h2, h3


def effective_rabi(p: ModelParams) -> float:
    """``Omega_eff = 18 sqrt(3) g^3 / omega_m^2``."""
    _require_weak(p)
    return 18 * np.sqrt(3) * p.g**3 / p.omega_m**2


def resonant_omega_c(p: ModelParams) -> float:
    """Cavity frequency equalizing the |0,3> and |2,0> effective energies."""
    _require_weak(p)
    return _resonant_ratio(p.g) * p.omega_m


def two_level_matrix(p: ModelParams) -> np.ndarray:
    """Effective Hamiltonian on the ordered basis (|0,3>, |2,0>)."""
    _require_weak(p)
    wm, g = p.omega_m, p.g
    off = 18 * np.sqrt(3) * g**3 / wm**2
    return np.array(
        [[3 * wm - 6 * g**2 / wm, off], [off, 2 * p.omega_c - 27 * g**2 / wm]], dtype=float
    )
