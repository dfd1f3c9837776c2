"""Eigenvalue sweeps through the |0,3> / |2,0> avoided crossing."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import partial

import numpy as np

from ._parallel import pmap
from .fock import FockSpace, hermitian_eig
from .model import ModelParams, build_effective, build_exact, effective_rabi

__all__ = [
    "SpectrumSweep",
    "TrackingError",
    "NoMinimumError",
    "DEFAULT_WINDOW",
    "sweep",
    "min_splitting",
    "locate_crossing",
    "pair_states",
    "write_sweep_csv",
]

DEFAULT_WINDOW = (1.4995, 1.5005)
MIN_CONTINUITY = 0.5


class TrackingError(RuntimeError):
    pass


class NoMinimumError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectrumSweep:
    """Tracked crossing pair versus ``omega_c / omega_m``.

    Arrays of shape ``(n_samples, 2)`` hold (lower, upper) members of the
    pair, i.e. levels 5 and 6 of the exact spectrum near the crossing.
    """

    ratios: np.ndarray
    energies_exact: np.ndarray
    energies_eff: np.ndarray | None
    overlap03_exact: np.ndarray
    overlap20_exact: np.ndarray
    overlap03_eff: np.ndarray | None
    overlap20_eff: np.ndarray | None
    levels_exact: np.ndarray  # global eigenvalue indices of the pair
    g: float

    @property
    def n_samples(self) -> int:
        return len(self.ratios)

    def splitting(self, which: str = "exact") -> np.ndarray:
        E = self.energies_exact if which == "exact" else self.energies_eff
        if E is None:
            raise ValueError("sweep has no effective branches")
        return E[:, 1] - E[:, 0]


def pair_states(H: np.ndarray, space: FockSpace):
    """Eigenpairs of ``H`` with the largest weight on span{|0,3>, |2,0>}.

    Returns ``(energies, vectors, levels)`` sorted by energy.
    """
    w, v = hermitian_eig(H)
    i03, i20 = space.index(0, 3), space.index(2, 0)
    weight = np.abs(v[i03]) ** 2 + np.abs(v[i20]) ** 2
    levels = np.sort(np.argsort(weight, kind="stable")[-2:])
    return w[levels], v[:, levels], levels


def _sample(ratio: float, p_base: ModelParams, space: FockSpace, effective: bool):
    p = p_base.replace(omega_c=ratio * p_base.omega_m)
    out = [pair_states(build_exact(p, space), space)]
    if effective:
        out.append(pair_states(build_effective(p, space), space))
    return out


def _subspace_overlap(U: np.ndarray, W: np.ndarray) -> float:
    s = np.linalg.svd(U.conj().T @ W, compute_uv=False)
    return float(s.min() ** 2)


def sweep(
    p_base: ModelParams,
    space: FockSpace,
    ratio_range: tuple[float, float] = DEFAULT_WINDOW,
    n_samples: int = 201,
    effective: bool = True,
    workers: int = 1,
) -> SpectrumSweep:
    """Diagonalize the exact (and effective) Hamiltonian across ``ratio_range``.

    At each sample the two eigenstates with the largest weight on the
    crossing pair are selected and ordered by energy. Adjacent samples must
    span nearly the same two-dimensional subspace; a drop below 0.5 in
    subspace overlap means the sampling is too coarse to follow the pair.
    """
    if n_samples < 3:
        raise ValueError("n_samples must be >= 3")
    lo, hi = ratio_range
    if not lo < hi:
        raise ValueError(f"empty ratio range {ratio_range}")
    ratios = np.linspace(lo, hi, n_samples)
    results = pmap(partial(_sample, p_base=p_base, space=space, effective=effective), ratios, workers)

    i03, i20 = space.index(0, 3), space.index(2, 0)
    cols = {"E": [], "o03": [], "o20": [], "lev": []}
    eff = {"E": [], "o03": [], "o20": []}
    prev = [None, None]
    for j, res in enumerate(results):
        for m, (E, V, lev) in enumerate(res):
            if prev[m] is not None:
                ov = _subspace_overlap(prev[m], V)
                if ov < MIN_CONTINUITY:
                    raise TrackingError(
                        f"pair subspace overlap {ov:.3f} between ratios {ratios[j - 1]:.9f} and "
                        f"{ratios[j]:.9f}; sample more densely"
                    )
            prev[m] = V
            target = cols if m == 0 else eff
            target["E"].append(E)
            target["o03"].append(np.abs(V[i03]) ** 2)
            target["o20"].append(np.abs(V[i20]) ** 2)
            if m == 0:
                cols["lev"].append(lev)

    def arr(x):
        return np.asarray(x) if x else None

    return SpectrumSweep(
        ratios=ratios,
        energies_exact=np.asarray(cols["E"]),
        energies_eff=arr(eff["E"]),
        overlap03_exact=np.asarray(cols["o03"]),
        overlap20_exact=np.asarray(cols["o20"]),
        overlap03_eff=arr(eff["o03"]),
        overlap20_eff=arr(eff["o20"]),
        levels_exact=np.asarray(cols["lev"]),
        g=p_base.g,
    )


def _parabola_vertex(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    c2, c1, c0 = np.polyfit(x - x[1], y, 2)
    if c2 <= 0:
        return float(x[1]), float(y[1])
    xv = -c1 / (2 * c2)
    return float(x[1] + xv), float(c0 - c1 * c1 / (4 * c2))


def min_splitting(s: SpectrumSweep, which: str = "exact") -> tuple[float, float]:
    """Location and size of the smallest pair splitting.

    Discrete minimum refined by the parabola through it and its two
    neighbours.
    """
    d = s.splitting(which)
    i = int(np.argmin(d))
    if i == 0 or i == len(d) - 1:
        raise NoMinimumError("splitting minimum lies on the sweep edge; widen or shift the window")
    return _parabola_vertex(s.ratios[i - 1 : i + 2], d[i - 1 : i + 2])


def locate_crossing(
    p_base: ModelParams,
    space: FockSpace,
    ratio_range: tuple[float, float] = DEFAULT_WINDOW,
    n_samples: int = 201,
    n_zoom: int = 21,
    resolution: float | None = None,
    max_levels: int = 12,
    workers: int = 1,
) -> tuple[float, float, list[SpectrumSweep]]:
    """Refine the avoided crossing by repeated narrower sweeps.

    The crossing is only about ``Omega_eff`` wide in ``omega_c``, far
    narrower than a useful survey window, so after the survey each level
    re-sweeps ``+-2`` spacings around the current minimum until the spacing
    drops below ``resolution`` (default ``Omega_eff / 4``).
    """
    if resolution is None:
        resolution = effective_rabi(p_base) / 4
    sweeps = [sweep(p_base, space, ratio_range, n_samples, effective=False, workers=workers)]
    r, split = min_splitting(sweeps[-1])
    h = sweeps[-1].ratios[1] - sweeps[-1].ratios[0]
    for _ in range(max_levels):
        if h <= resolution:
            break
        s = sweep(p_base, space, (r - 2 * h, r + 2 * h), n_zoom, effective=False, workers=workers)
        sweeps.append(s)
        r, split = min_splitting(s)
        h = s.ratios[1] - s.ratios[0]
    return r, split, sweeps


def write_sweep_csv(s: SpectrumSweep, path) -> None:
    header = [
        "ratio", "E5_exact", "E6_exact", "E5_eff", "E6_eff",
        "ov03_E5_exact", "ov20_E5_exact", "ov03_E6_exact", "ov20_E6_exact",
        "ov03_E5_eff", "ov20_E5_eff", "ov03_E6_eff", "ov20_E6_eff",
    ]
    nan2 = np.full((s.n_samples, 2), np.nan)
    Ee = s.energies_eff if s.energies_eff is not None else nan2
    o3e = s.overlap03_eff if s.overlap03_eff is not None else nan2
    o2e = s.overlap20_eff if s.overlap20_eff is not None else nan2
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for j in range(s.n_samples):
            w.writerow(
                [f"{s.ratios[j]:.12f}"]
                + [repr(float(x)) for x in (
                    s.energies_exact[j, 0], s.energies_exact[j, 1], Ee[j, 0], Ee[j, 1],
                    s.overlap03_exact[j, 0], s.overlap20_exact[j, 0],
                    s.overlap03_exact[j, 1], s.overlap20_exact[j, 1],
                    o3e[j, 0], o2e[j, 0], o3e[j, 1], o2e[j, 1],
                )]
            )
