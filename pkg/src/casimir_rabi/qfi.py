"""Quantum Fisher information of the evolved state with respect to ``omega_c``.

For a pure state ``phi`` depending on a parameter ``A``,
``F_A = 4 (<d phi|d phi> - |<phi|d phi>|^2)``. Here ``phi = exp(-i H_s t_f) psi0``
and ``A = omega_c``. Two routes are provided: a central difference on the
propagated state (:func:`qfi_at`, the production path) and a closed form
in the eigenbasis of ``H_s`` (:func:`qfi_exact`), which uses
``dH/d omega_c = a^+a``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from ._parallel import pmap
from .fock import FockSpace, SpectralPropagator, hermitian_eig
from .model import ModelParams, build_exact, effective_rabi, resonant_omega_c

__all__ = [
    "DEFAULT_DELTA",
    "RICHARDSON_RTOL",
    "QfiScan",
    "RichardsonError",
    "qfi_from_states",
    "qfi_at",
    "qfi_exact",
    "qfi_scan",
    "locate_peak",
    "rabi_half_period",
    "write_qfi_csv",
    "write_peak_json",
]

DEFAULT_DELTA = 1e-10
RICHARDSON_RTOL = 0.05


class RichardsonError(ArithmeticError):
    pass


def rabi_half_period(p: ModelParams) -> float:
    """``pi / Omega_eff``: half the amplitude period, one full cycle of the populations.

    The state passes through |2,0> at ``pi / (2 Omega_eff)`` and returns to
    |0,3> (up to phase) at this time.
    """
    return np.pi / effective_rabi(p)


def qfi_from_states(phi: np.ndarray, dphi: np.ndarray) -> float:
    overlap = np.vdot(phi, dphi)
    return float(4 * (np.vdot(dphi, dphi).real - abs(overlap) ** 2))


def _evolved(p: ModelParams, space: FockSpace, psi0: np.ndarray, t_f: float, omega_c: float) -> np.ndarray:
    H = build_exact(p.replace(omega_c=omega_c), space)
    return SpectralPropagator(H, hermitian=True).apply(psi0, t_f)


def _fd(p, space, psi0, t_f, delta):
    w_plus, w_minus = p.omega_c + delta, p.omega_c - delta
    span = w_plus - w_minus  # the step actually represented in floating point
    if span == 0:
        raise RichardsonError(f"step delta={delta:g} ill-conditioned: below the resolution of omega_c")
    plus = _evolved(p, space, psi0, t_f, w_plus)
    minus = _evolved(p, space, psi0, t_f, w_minus)
    phi = _evolved(p, space, psi0, t_f, p.omega_c)
    return qfi_from_states(phi, (plus - minus) / span)


def qfi_at(
    p: ModelParams,
    space: FockSpace,
    psi0: np.ndarray,
    t_f: float,
    delta: float = DEFAULT_DELTA,
    check: bool = True,
) -> float:
    """QFI by central differences with step ``delta``.

    With ``check`` the value is recomputed at ``delta / 2``; the two must
    agree within 5% unless both lie below the noise floor
    ``1e-6 * t_f**2``, otherwise :class:`RichardsonError` is raised.

    Notes
    -----
    ``delta`` must resolve a peak about ``Omega_eff`` wide while keeping
    the amplitude difference well above round-off. The phase error of
    ``exp(-i E t_f)`` is about ``1e-16 * E * t_f``, so the difference
    quotient carries an absolute error near ``1e-16 * E * t_f / delta``.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.vdot(psi0, psi0).real - 1) > 1e-10:
        raise ValueError("psi0 must be normalized")
    if not delta > 0:
        raise ValueError("delta must be positive")
    F = _fd(p, space, psi0, t_f, delta)
    if check:
        F_half = _fd(p, space, psi0, t_f, delta / 2)
        floor = 1e-6 * t_f**2
        if max(abs(F), abs(F_half)) > floor and abs(F - F_half) > RICHARDSON_RTOL * max(abs(F), abs(F_half)):
            raise RichardsonError(
                f"step delta={delta:g} ill-conditioned: F(delta)={F:.6g}, F(delta/2)={F_half:.6g}"
            )
    return F


def qfi_exact(p: ModelParams, space: FockSpace, psi0: np.ndarray, t_f: float) -> float:
    """QFI from the eigenbasis integral of ``a^+a`` along the evolution.

    ``d phi = -i int_0^t_f exp(-iH(t_f - s)) a^+a exp(-iHs) psi0 ds``. In
    the eigenbasis the integral of each matrix element is
    ``(exp(-i (E_k - E_j) t_f) - 1) / (-i (E_k - E_j))`` (or ``t_f`` for a
    degenerate pair), and the common phases cancel from the QFI.
    """
    E, V = hermitian_eig(build_exact(p, space))
    c = V.conj().T @ np.asarray(psi0, dtype=complex)
    N = V.conj().T @ (space.photon_numbers()[:, None] * V)
    d = E[None, :] - E[:, None]  # d[j, k] = E_k - E_j
    x = -1j * d * t_f
    small = np.abs(d * t_f) < 1e-8
    safe = np.where(small, 1.0, d)
    I = np.where(small, t_f * (1 + x / 2), np.expm1(x) / (-1j * safe))
    u = (N * I) @ c
    return float(4 * (np.vdot(u, u).real - abs(np.vdot(c, u)) ** 2))


@dataclass(frozen=True)
class QfiScan:
    omega_c: np.ndarray
    F: np.ndarray
    t_f: float
    delta: float
    method: str
    g: float
    meta: dict = field(default_factory=dict)

    def peak(self) -> tuple[float, float]:
        """Discrete maximum refined by the parabola through its neighbours."""
        i = int(np.argmax(self.F))
        if i == 0 or i == len(self.F) - 1:
            raise ValueError("QFI maximum lies on the scan edge; widen or shift the window")
        x, y = self.omega_c[i - 1 : i + 2], self.F[i - 1 : i + 2]
        c2, c1, c0 = np.polyfit(x - x[1], y, 2)
        if c2 >= 0:
            return float(x[1]), float(y[1])
        xv = -c1 / (2 * c2)
        if abs(xv) > x[2] - x[1]:
            return float(x[1]), float(y[1])
        return float(x[1] + xv), float(max(y[1], c0 - c1 * c1 / (4 * c2)))

    def peak_to_edge(self, peak_value: float | None = None) -> float:
        """Ratio of the maximum (or a refined ``peak_value``) to the larger edge value."""
        top = self.F.max() if peak_value is None else peak_value
        return float(top / max(self.F[0], self.F[-1]))


def _point(omega_c, p_base, space, psi0, t_f, delta, method):
    p = p_base.replace(omega_c=float(omega_c))
    if method == "exact":
        return qfi_exact(p, space, psi0, t_f)
    return qfi_at(p, space, psi0, t_f, delta)


def qfi_scan(
    p_base: ModelParams,
    space: FockSpace,
    omega_c_range: tuple[float, float],
    n_samples: int,
    t_f: float,
    psi0: np.ndarray | None = None,
    delta: float = DEFAULT_DELTA,
    method: str = "fd",
    workers: int = 1,
) -> QfiScan:
    """QFI on ``n_samples`` evenly spaced cavity frequencies.

    ``method`` is ``"fd"`` (central differences with Richardson check) or
    ``"exact"`` (eigenbasis integral).
    """
    if method not in ("fd", "exact"):
        raise ValueError(f"unknown method {method!r}")
    psi0 = space.ket(0, 3) if psi0 is None else np.asarray(psi0, dtype=complex)
    omegas = np.linspace(*omega_c_range, n_samples)
    F = pmap(partial(_point, p_base=p_base, space=space, psi0=psi0, t_f=t_f, delta=delta, method=method), omegas, workers)
    return QfiScan(omegas, np.asarray(F), float(t_f), float(delta), method, p_base.g)


def locate_peak(
    p_base: ModelParams,
    space: FockSpace,
    t_f: float | None = None,
    width: float = 1e-4,
    n_samples: int = 201,
    n_zoom: int = 21,
    resolution: float | None = None,
    psi0: np.ndarray | None = None,
    delta: float = DEFAULT_DELTA,
    method: str = "fd",
    workers: int = 1,
    max_levels: int = 12,
) -> tuple[float, float, list[QfiScan]]:
    """Survey a window centred on the resonance, then zoom onto the QFI maximum.

    The peak is only about ``Omega_eff`` wide, so each zoom re-scans
    ``+-2`` spacings around the current maximum until the spacing is below
    ``resolution`` (default ``Omega_eff / 20``). Returns
    ``(omega_c_peak, F_peak, scans)``; ``scans[0]`` is the survey.
    """
    if t_f is None:
        t_f = rabi_half_period(p_base)
    if resolution is None:
        resolution = effective_rabi(p_base) / 20
    centre = resonant_omega_c(p_base)
    kw = dict(psi0=psi0, delta=delta, method=method, workers=workers)
    scans = [qfi_scan(p_base, space, (centre - width / 2, centre + width / 2), n_samples, t_f, **kw)]
    w, F = scans[0].peak()
    h = scans[0].omega_c[1] - scans[0].omega_c[0]
    for _ in range(max_levels):
        if h <= resolution:
            break
        s = qfi_scan(p_base, space, (w - 2 * h, w + 2 * h), n_zoom, t_f, **kw)
        scans.append(s)
        w, F = s.peak()
        h = s.omega_c[1] - s.omega_c[0]
    return w, F, scans


def write_qfi_csv(scan: QfiScan, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega_c", "F"])
        for x, f in zip(scan.omega_c, scan.F):
            w.writerow([f"{x:.13f}", repr(float(f))])


def write_peak_json(omega_peak: float, F_peak: float, survey: QfiScan, path) -> None:
    with open(path, "w") as fh:
        json.dump(
            {
                "omega_c_peak": omega_peak,
                "F_peak": F_peak,
                "t_f": survey.t_f,
                "delta": survey.delta,
                "method": survey.method,
                "g": survey.g,
                "window": [float(survey.omega_c[0]), float(survey.omega_c[-1])],
                "n_samples": int(len(survey.omega_c)),
                "peak_to_edge": survey.peak_to_edge(F_peak),
            },
            fh,
            indent=2,
        )
