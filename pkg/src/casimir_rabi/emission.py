"""Emission statistics of trajectory ensembles.

Each trajectory is labelled by the channel of its first jump (photon or
phonon emission) and tested for bundle emission: quanta of one channel
leaving within one lifetime of each other.

Bundle rules, with ``t_1 < t_2 < ...`` the jump times in one channel:

``2PtBE``
    at least two cavity jumps, every consecutive interval below ``1/gamma_a``.
``2PnBE``
    at least two mechanical jumps, ``t_2 - t_1 < 1/gamma_b``.
``3PnBE``
    exactly three mechanical jumps, both intervals below ``1/gamma_b``.

``2PnBE`` only looks at the first pair, so a three-phonon cascade whose
first two phonons leave together counts as a two-phonon bundle even when
the third is late.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest, chi2_contingency

from .fock import FockSpace
from .mcwf import RNG_ALGORITHM, TrajectoryRecord, run_ensemble
from .model import ModelParams

__all__ = [
    "CATEGORIES",
    "HIST_WIDTH",
    "EmissionStats",
    "classify",
    "classify_one",
    "rate_scan",
    "free_dissipation_baseline",
    "bundle_homogeneity",
    "binomial_ci",
    "write_stats_json",
    "write_histogram_csv",
    "write_rate_scan_csv",
    "write_bundle_csv",
]

CATEGORIES = ("PtBE", "PnBE", "2PtBE", "2PnBE", "3PnBE")
HIST_WIDTH = 0.5
RATE_SCAN_GAMMA_A = 1e-9


def binomial_ci(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    if n == 0:
        return (0.0, 1.0)
    ci = binomtest(k, n).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class EmissionStats:
    n_traj: int
    counts: dict
    histograms: dict  # channel -> (edges, counts) of pre-jump excitation at the first jump
    gamma_a: float
    gamma_b: float
    unclassified: int = 0
    meta: dict = field(default_factory=dict)

    def fraction(self, key: str, of: str | None = None) -> float:
        """``counts[key] / counts[of]``, or over ``n_traj`` when ``of`` is None."""
        n = self.n_traj if of is None else self.counts[of]
        return self.counts[key] / n if n else float("nan")

    def sigma(self, key: str, of: str | None = None) -> float:
        """Binomial standard error of :meth:`fraction`."""
        n = self.n_traj if of is None else self.counts[of]
        f = self.fraction(key, of)
        return float(np.sqrt(f * (1 - f) / n)) if n else float("nan")

    def peak_bin(self, channel: str) -> tuple[float, float]:
        edges, counts = self.histograms[channel]
        i = int(np.argmax(counts))
        return float(edges[i]), float(edges[i + 1])

    def bin_count(self, channel: str, lo: float) -> int:
        edges, counts = self.histograms[channel]
        i = int(np.argmin(np.abs(np.asarray(edges[:-1]) - lo)))
        if abs(edges[i] - lo) > 1e-12:
            raise KeyError(f"no bin starting at {lo}")
        return int(counts[i])

    def to_dict(self) -> dict:
        out = {
            "n_traj": self.n_traj,
            "gamma_a": self.gamma_a,
            "gamma_b": self.gamma_b,
            "unclassified": self.unclassified,
            "counts": dict(self.counts),
            "fractions": {},
            "histograms": {
                ch: {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}
                for ch, (edges, counts) in self.histograms.items()
            },
            **self.meta,
        }
        for key, of in (("PtBE", None), ("PnBE", None), ("2PtBE", "PtBE"), ("2PnBE", "PnBE"), ("3PnBE", "PnBE")):
            n = self.n_traj if of is None else self.counts[of]
            lo, hi = binomial_ci(self.counts[key], n)
            out["fractions"][key] = {
                "of": of or "n_traj", "value": self.fraction(key, of), "ci95": [lo, hi]
            }
        return out


def classify_one(record: TrajectoryRecord) -> dict:
    """Category flags of one trajectory."""
    p = record.params
    ct = record.channel_times("cavity")
    mt = record.channel_times("mechanical")
    first = record.first_channel
    flags = {
        "PtBE": first == "cavity",
        "PnBE": first == "mechanical",
        "2PtBE": len(ct) >= 2 and p.gamma_a > 0 and bool(np.all(np.diff(ct) < 1 / p.gamma_a)),
        "2PnBE": len(mt) >= 2 and p.gamma_b > 0 and bool(mt[1] - mt[0] < 1 / p.gamma_b),
        "3PnBE": len(mt) == 3 and p.gamma_b > 0 and bool(np.all(np.diff(mt) < 1 / p.gamma_b)),
    }
    return flags


def _first_excitation(record: TrajectoryRecord, channel: str) -> float:
    for j in record.jumps:
        if j.channel == channel:
            return j.n_photon if channel == "cavity" else j.n_phonon
    raise ValueError("channel absent")


def classify(records: list[TrajectoryRecord], hist_max: float = 3.0) -> EmissionStats:
    """Count emission categories and build first-emission histograms.

    The histogram for a channel covers the trajectories whose first jump
    is in that channel and bins the pre-jump photon (phonon) number in
    bins of width 0.5 on ``[0, hist_max]``, widened if needed.
    """
    if not records:
        raise ValueError("empty ensemble")
    p = records[0].params
    for r in records:
        if r.params != p:
            raise ValueError(f"mixed parameters in ensemble: {r.params} vs {p}")
    counts = dict.fromkeys(CATEGORIES, 0)
    firsts = {"cavity": [], "mechanical": []}
    unclassified = 0
    for r in records:
        flags = classify_one(r)
        for key, v in flags.items():
            counts[key] += int(v)
        if r.first_channel is None:
            unclassified += 1
        else:
            firsts[r.first_channel].append(_first_excitation(r, r.first_channel))
    top = max([hist_max] + [max(v) for v in firsts.values() if v])
    edges = np.arange(0.0, np.ceil(top / HIST_WIDTH) * HIST_WIDTH + HIST_WIDTH / 2, HIST_WIDTH)
    hists = {ch: (edges, np.histogram(v, bins=edges)[0]) for ch, v in firsts.items()}
    return EmissionStats(
        n_traj=len(records),
        counts=counts,
        histograms=hists,
        gamma_a=p.gamma_a,
        gamma_b=p.gamma_b,
        unclassified=unclassified,
        meta={"master_seed": records[0].master_seed, "rng": RNG_ALGORITHM, "omega_c": p.omega_c, "g": p.g},
    )


def rate_scan(
    p_base: ModelParams,
    ratios,
    n_traj: int,
    master_seed: int,
    space: FockSpace | None = None,
    psi0: np.ndarray | None = None,
    gamma_a: float = RATE_SCAN_GAMMA_A,
    dt: float | None = None,
    workers: int = 1,
) -> list[EmissionStats]:
    """Ensemble statistics for ``gamma_b = ratio * gamma_a`` over ``ratios``.

    Ensemble ``k`` uses master seed ``master_seed + k``. Each run lasts
    five lifetimes of the slower channel.
    """
    from .mcwf import default_dt

    space = space or FockSpace(6, 8)
    psi0 = space.ket(0, 3) if psi0 is None else psi0
    out = []
    for k, ratio in enumerate(ratios):
        if not ratio > 0:
            raise ValueError(f"rate ratios must be positive, got {ratio}")
        p = p_base.replace(gamma_a=gamma_a, gamma_b=ratio * gamma_a)
        step = dt if dt is not None else default_dt(p)
        recs = run_ensemble(p, space, psi0, 5 / min(p.gamma_a, p.gamma_b), step, master_seed + k, n_traj, workers=workers)
        st = classify(recs)
        st.meta["ratio"] = float(ratio)
        out.append(st)
    return out


def bundle_homogeneity(stats: list[EmissionStats], bundle: str = "2PtBE", base: str = "PtBE") -> float:
    """p-value of the chi-squared test that ``bundle / base`` is the same in every ensemble."""
    table = np.array([[s.counts[bundle], s.counts[base] - s.counts[bundle]] for s in stats])
    if np.any(table.sum(axis=0) == 0):
        return 1.0  # a constant column carries no evidence against homogeneity
    return float(chi2_contingency(table, correction=False)[1])


def free_dissipation_baseline(
    initial: tuple[int, int],
    gamma_a: float,
    gamma_b: float,
    n_traj: int,
    master_seed: int,
    workers: int = 1,
    horizon: float = 40.0,
) -> EmissionStats:
    """Pure-decay ensemble from a Fock state, with the mirror decoupled (``g = 0``).

    ``initial`` is ``(n, k)`` for |n,k>. The space is the smallest one
    holding it. The run lasts ``horizon`` lifetimes of the slower active
    channel.
    """
    n, k = initial
    space = FockSpace(n + 1, k + 1)
    p = ModelParams(omega_c=1.5, g=0.0, gamma_a=gamma_a, gamma_b=gamma_b)
    active = [r for r, q in ((gamma_a, n), (gamma_b, k)) if q > 0 and r > 0]
    if not active:
        raise ValueError("initial state has no decaying excitation")
    max_rate = gamma_a * n + gamma_b * k
    dt = 0.02 / max_rate
    recs = run_ensemble(
        p, space, space.ket(n, k), horizon / min(active), dt, master_seed, n_traj,
        record_every=10**9, workers=workers,
    )
    st = classify(recs)
    st.meta["initial"] = f"|{n},{k}>"
    return st


def write_stats_json(stats: EmissionStats, path) -> None:
    with open(path, "w") as fh:
        json.dump(stats.to_dict(), fh, indent=2)


def write_histogram_csv(stats: EmissionStats, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["channel", "bin_lo", "bin_hi", "count"])
        for ch, (edges, counts) in stats.histograms.items():
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                w.writerow([ch, f"{lo:.1f}", f"{hi:.1f}", int(c)])


def write_rate_scan_csv(stats: list[EmissionStats], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma_b_over_gamma_a", "n_traj", *CATEGORIES, "unclassified",
                    "PtBE_fraction", "2PtBE_over_PtBE", "2PnBE_over_PnBE", "3PnBE_over_PnBE"])
        for s in stats:
            w.writerow([
                repr(s.gamma_b / s.gamma_a), s.n_traj, *(s.counts[c] for c in CATEGORIES), s.unclassified,
                repr(s.fraction("PtBE")), repr(s.fraction("2PtBE", "PtBE")),
                repr(s.fraction("2PnBE", "PnBE")), repr(s.fraction("3PnBE", "PnBE")),
            ])


def write_bundle_csv(rows: list[tuple[str, str, EmissionStats]], path) -> None:
    """Bundle probabilities; ``rows`` holds ``(label, bundle, stats)``."""
    base = {"2PtBE": "PtBE", "2PnBE": "PnBE", "3PnBE": "PnBE"}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "bundle", "count", "denominator", "probability", "sigma"])
        for label, bundle, s in rows:
            w.writerow([label, bundle, s.counts[bundle], s.counts[base[bundle]],
                        repr(s.fraction(bundle, base[bundle])), repr(s.sigma(bundle, base[bundle]))])
