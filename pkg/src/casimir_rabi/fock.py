"""Truncated two-mode Fock space and dense linear algebra on it.

States are complex 1-d arrays and operators complex 2-d arrays in the
photon-major basis ``|n, k> = |n>_cav (x) |k>_mech`` with flat index
``n * n_mech + k``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

__all__ = [
    "FockSpace",
    "EigenDecomposition",
    "NotHermitianError",
    "StepTooLargeError",
    "TruncationWarning",
    "annihilation_cavity",
    "annihilation_mech",
    "check_hermitian",
    "hermitian_eig",
    "jacobi_eigh",
    "SpectralPropagator",
    "evolve_closed",
    "fixed_step_propagator",
    "leakage_report",
    "warn_if_leaking",
    "operator_to_json",
    "operator_from_json",
    "state_to_json",
    "state_from_json",
]

LEAKAGE_WARN = 1e-6


class NotHermitianError(ValueError):
    pass


class StepTooLargeError(ValueError):
    pass


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FockSpace:
    """Two bosonic modes truncated to ``n_cav`` photon and ``n_mech`` phonon levels."""

    n_cav: int
    n_mech: int

    def __post_init__(self):
        if int(self.n_cav) != self.n_cav or int(self.n_mech) != self.n_mech:
            raise ValueError("cutoffs must be integers")
        if self.n_cav < 1 or self.n_mech < 1:
            raise ValueError(f"cutoffs must be >= 1, got ({self.n_cav}, {self.n_mech})")

    @property
    def dim(self) -> int:
        return self.n_cav * self.n_mech

    def index(self, n: int, k: int) -> int:
        if not (0 <= n < self.n_cav and 0 <= k < self.n_mech):
            raise IndexError(f"|{n},{k}> outside space ({self.n_cav}, {self.n_mech})")
        return n * self.n_mech + k

    def labels(self) -> list[tuple[int, int]]:
        return [(n, k) for n in range(self.n_cav) for k in range(self.n_mech)]

    def ket(self, n: int, k: int) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index(n, k)] = 1.0
        return psi

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def photon_numbers(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_cav, dtype=float), self.n_mech)

    def phonon_numbers(self) -> np.ndarray:
        return np.tile(np.arange(self.n_mech, dtype=float), self.n_cav)

    def number_cavity(self) -> np.ndarray:
        return np.diag(self.photon_numbers()).astype(complex)

    def number_mech(self) -> np.ndarray:
        return np.diag(self.phonon_numbers()).astype(complex)


def _ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)


def annihilation_cavity(space: FockSpace) -> np.ndarray:
    """Photon annihilation operator ``a (x) 1`` with ``a|n> = sqrt(n)|n-1>``."""
    return np.kron(_ladder(space.n_cav), np.eye(space.n_mech)).astype(complex)


def annihilation_mech(space: FockSpace) -> np.ndarray:
    """Phonon annihilation operator ``1 (x) b``."""
    return np.kron(np.eye(space.n_cav), _ladder(space.n_mech)).astype(complex)


def check_hermitian(M: np.ndarray, rtol: float = 1e-12) -> float:
    """Return ``max|M - M^H|``; raise NotHermitianError above ``rtol * max|M|``."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    asym = float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0
    scale = float(np.max(np.abs(M))) if M.size else 0.0
    if asym > rtol * max(scale, np.finfo(float).tiny):
        raise NotHermitianError(
            f"matrix is not Hermitian: max|M - M^H| = {asym:.3e} (max|M| = {scale:.3e})"
        )
    return asym


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns


def hermitian_eig(M: np.ndarray, method: str = "lapack") -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    ``method="jacobi"`` uses :func:`jacobi_eigh` instead of LAPACK.
    """
    M = np.asarray(M, dtype=complex)
    check_hermitian(M)
    H = 0.5 * (M + M.conj().T)
    if method == "lapack":
        w, v = np.linalg.eigh(H)
    elif method == "jacobi":
        w, v = jacobi_eigh(H)
    else:
        raise ValueError(f"unknown method {method!r}")
    return EigenDecomposition(w, v)


def jacobi_eigh(
    A: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60
) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi diagonalization of a complex Hermitian matrix.

    Each 2x2 pivot is first made real by a diagonal phase and then zeroed
    by a plane rotation. Returns ascending eigenvalues and eigenvectors as
    columns.
    """
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        if np.linalg.norm(A[offdiag]) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                theta = (A[q, q].real - A[p, p].real) / (2.0 * mag)
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # J = diag(1, conj(phase)) @ [[c, s], [-s, c]] on columns p, q
                jpp, jpq = c, s
                jqp, jqq = -s * np.conj(phase), c * np.conj(phase)
                colp, colq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = colp * jpp + colq * jqp
                A[:, q] = colp * jpq + colq * jqq
                rowp, rowq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = np.conj(jpp) * rowp + np.conj(jqp) * rowq
                A[q, :] = np.conj(jpq) * rowp + np.conj(jqq) * rowq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = vp * jpp + vq * jqp
                V[:, q] = vp * jpq + vq * jqq
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    w = np.diag(A).real
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


class SpectralPropagator:
    """``exp(-i H t)`` at arbitrary ``t`` from one cached eigendecomposition.

    Works for Hermitian ``H`` (unitary evolution) and for diagonalizable
    non-Hermitian ``H``; in the latter case the eigenvector condition number
    is checked and evolution falls back to ``scipy.linalg.expm`` when the
    basis is too ill-conditioned to trust.
    """

    def __init__(self, H: np.ndarray, hermitian: bool | None = None, max_cond: float = 1e8):
        H = np.asarray(H, dtype=complex)
        if hermitian is None:
            try:
                check_hermitian(H, rtol=1e-14)
                hermitian = True
            except NotHermitianError:
                hermitian = False
        self.H = H
        self.hermitian = hermitian
        self.fallback = False
        if hermitian:
            self.eigenvalues, self.V = hermitian_eig(H)
            self.Vinv = self.V.conj().T
        else:
            w, V = np.linalg.eig(H)
            cond = np.linalg.cond(V)
            self.eigenvalues, self.V = w, V
            if not np.isfinite(cond) or cond > max_cond:
                self.fallback = True
                self.Vinv = None
            else:
                self.Vinv = np.linalg.inv(V)

    def coefficients(self, psi: np.ndarray) -> np.ndarray:
        return self.Vinv @ psi

    def apply(self, psi: np.ndarray, t) -> np.ndarray:
        """Evolve ``psi`` to time(s) ``t``; array ``t`` gives states as columns."""
        t_arr = np.asarray(t, dtype=float)
        if self.fallback:
            if t_arr.ndim == 0:
                return scipy.linalg.expm(-1j * self.H * float(t_arr)) @ psi
            return np.stack(
                [scipy.linalg.expm(-1j * self.H * tk) @ psi for tk in t_arr], axis=1
            )
        c = self.Vinv @ psi
        if t_arr.ndim == 0:
            return self.V @ (np.exp(-1j * self.eigenvalues * float(t_arr)) * c)
        phases = np.exp(-1j * np.outer(self.eigenvalues, t_arr))
        return self.V @ (phases * c[:, None])

    def matrix(self, t: float) -> np.ndarray:
        if self.fallback:
            return scipy.linalg.expm(-1j * self.H * t)
        return (self.V * np.exp(-1j * self.eigenvalues * t)) @ self.Vinv


def evolve_closed(H: np.ndarray, psi0: np.ndarray, t, propagator: SpectralPropagator | None = None):
    """Solve the Schrodinger equation for time-independent Hermitian ``H``.

    A single spectral application per time, so ``t ~ 1e8`` costs the same as
    ``t ~ 1``. Pass a prebuilt ``propagator`` to reuse the decomposition.
    """
    if propagator is None:
        propagator = SpectralPropagator(H, hermitian=True)
    elif not propagator.hermitian:
        raise ValueError("evolve_closed needs a Hermitian propagator")
    return propagator.apply(np.asarray(psi0, dtype=complex), t)


def fixed_step_propagator(H: np.ndarray, dt: float, max_norm_dt: float = 0.1) -> np.ndarray:
    """Dense ``exp(-i H dt)`` for repeated matrix-vector stepping.

    Uses Pade scaling-and-squaring. ``H`` may be non-Hermitian. The step is
    rejected when ``||H||_2 * dt`` exceeds ``max_norm_dt``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    H = np.asarray(H, dtype=complex)
    norm = float(np.linalg.norm(H, 2))
    if norm * dt > max_norm_dt:
        raise StepTooLargeError(
            f"||H|| dt = {norm * dt:.3g} exceeds {max_norm_dt}; use dt <= {max_norm_dt / norm:.6g}"
        )
    return scipy.linalg.expm(-1j * dt * H)


def leakage_report(space: FockSpace, states, density: bool = False, warn: bool = True) -> dict:
    """Largest population found on the top photon and top phonon level.

    ``states`` is a ket, a 2-d array of kets as columns, or (with
    ``density=True``) a density matrix.
    """
    arr = np.asarray(states)
    if density:
        pops = np.real(np.diag(arr))[:, None]
    else:
        if arr.ndim == 1:
            arr = arr[:, None]
        pops = np.abs(arr) ** 2
        pops = pops / np.maximum(pops.sum(axis=0, keepdims=True), np.finfo(float).tiny)
    pops = pops.reshape(space.n_cav, space.n_mech, -1)
    top_cav = float(pops[-1].sum(axis=0).max()) if space.n_cav > 1 else 0.0
    top_mech = float(pops[:, -1].sum(axis=0).max()) if space.n_mech > 1 else 0.0
    report = {"top_photon_level": top_cav, "top_phonon_level": top_mech, "threshold": LEAKAGE_WARN}
    if warn:
        warn_if_leaking(report)
    return report


def warn_if_leaking(report: dict) -> bool:
    """Emit a TruncationWarning when a leakage report exceeds the threshold."""
    top_cav, top_mech = report["top_photon_level"], report["top_phonon_level"]
    if max(top_cav, top_mech) > LEAKAGE_WARN:
        warnings.warn(
            f"truncation leakage: top photon level {top_cav:.2e}, top phonon level {top_mech:.2e}",
            TruncationWarning,
            stacklevel=3,
        )
        return True
    return False


# JSON layout: {"kind", "n_cav", "n_mech", "dim", "ordering", "data"} with
# data as row-major [re, im] pairs.
_ORDERING = "photon-major: index = n * n_mech + k"


def operator_to_json(space: FockSpace, M: np.ndarray) -> str:
    M = np.asarray(M, dtype=complex)
    if M.shape != (space.dim, space.dim):
        raise ValueError(f"operator shape {M.shape} does not match dim {space.dim}")
    data = [[[float(z.real), float(z.imag)] for z in row] for row in M]
    return json.dumps(
        {"kind": "operator", "n_cav": space.n_cav, "n_mech": space.n_mech,
         "dim": space.dim, "ordering": _ORDERING, "data": data}
    )


def operator_from_json(text: str) -> tuple[FockSpace, np.ndarray]:
    obj = json.loads(text)
    if obj.get("kind") != "operator":
        raise ValueError("not an operator document")
    space = FockSpace(obj["n_cav"], obj["n_mech"])
    arr = np.asarray(obj["data"], dtype=float)
    M = arr[..., 0] + 1j * arr[..., 1]
    if M.shape != (space.dim, space.dim):
        raise ValueError("operator data does not match declared dimensions")
    return space, M


def state_to_json(space: FockSpace, psi: np.ndarray) -> str:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (space.dim,):
        raise ValueError(f"state shape {psi.shape} does not match dim {space.dim}")
    return json.dumps(
        {"kind": "state", "n_cav": space.n_cav, "n_mech": space.n_mech,
         "dim": space.dim, "ordering": _ORDERING,
         "data": [[float(z.real), float(z.imag)] for z in psi]}
    )


def state_from_json(text: str) -> tuple[FockSpace, np.ndarray]:
    obj = json.loads(text)
    if obj.get("kind") != "state":
        raise ValueError("not a state document")
    space = FockSpace(obj["n_cav"], obj["n_mech"])
    arr = np.asarray(obj["data"], dtype=float)
    psi = arr[:, 0] + 1j * arr[:, 1]
    if psi.shape != (space.dim,):
        raise ValueError("state data does not match declared dimensions")
    return space, psi
