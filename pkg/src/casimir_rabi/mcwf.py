"""Quantum-jump (Monte Carlo wave-function) trajectories.

Two loss channels, photon loss ``sqrt(gamma_a) a`` and phonon loss
``sqrt(gamma_b) b``. The production engine uses the waiting-time form of
the unraveling: draw ``r1``, let the unnormalized no-jump state decay until
``||psi||^2`` falls to ``r1``, pin that instant down by root bracketing,
then pick the channel with a second draw ``r2`` and jump. The fixed-step
form (one Bernoulli trial per step) is kept as :func:`run_trajectory_per_step`.

Random numbers come from ``PCG64`` seeded through ``SeedSequence``;
trajectory ``i`` of an ensemble uses ``SeedSequence(master_seed,
spawn_key=(i,))`` so every trajectory is reproducible on its own.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.optimize import brentq

from ._parallel import pmap
from .fock import (
    FockSpace,
    SpectralPropagator,
    annihilation_cavity,
    annihilation_mech,
    fixed_step_propagator,
    StepTooLargeError,
)
from .dynamics import frame_hamiltonian
from .model import ModelParams, effective_rabi

__all__ = [
    "RNG_ALGORITHM",
    "CHANNELS",
    "JumpEvent",
    "TrajectoryRecord",
    "TrajectoryError",
    "DtTooLargeError",
    "PropagatorDefectError",
    "JumpEngine",
    "default_dt",
    "make_rng",
    "run_trajectory",
    "run_trajectory_per_step",
    "run_ensemble",
    "no_jump_trace",
    "write_jsonl",
    "read_jsonl",
    "write_trajectory_csv",
]

RNG_ALGORITHM = "numpy PCG64 via SeedSequence(master_seed, spawn_key=(index,))"
CHANNELS = ("cavity", "mechanical")
MAX_STEP_PROBABILITY = 0.1


class TrajectoryError(RuntimeError):
    pass


class DtTooLargeError(ValueError):
    pass


class PropagatorDefectError(RuntimeError):
    pass


@dataclass(frozen=True)
class JumpEvent:
    time: float
    channel: str
    n_photon: float  # normalized expectations just before the jump
    n_phonon: float


@dataclass(frozen=True)
class TrajectoryRecord:
    master_seed: int
    index: int
    params: ModelParams
    frame: str
    t_final: float
    dt: float
    times: np.ndarray
    n_photon: np.ndarray
    n_phonon: np.ndarray
    jumps: tuple[JumpEvent, ...]
    final_state: str
    rng: str = RNG_ALGORITHM

    @property
    def first_channel(self) -> str | None:
        return self.jumps[0].channel if self.jumps else None

    def channel_times(self, channel: str) -> np.ndarray:
        return np.array([j.time for j in self.jumps if j.channel == channel])

    def to_json(self) -> str:
        p = self.params
        return json.dumps(
            {
                "master_seed": self.master_seed,
                "index": self.index,
                "rng": self.rng,
                "frame": self.frame,
                "params": {"omega_c": p.omega_c, "g": p.g, "gamma_a": p.gamma_a, "gamma_b": p.gamma_b},
                "t_final": self.t_final,
                "dt": self.dt,
                "jumps": [
                    {"t": j.time, "channel": j.channel, "n_photon": j.n_photon, "n_phonon": j.n_phonon}
                    for j in self.jumps
                ],
                "final_state": self.final_state,
                "samples": {
                    "t": self.times.tolist(),
                    "n_photon": self.n_photon.tolist(),
                    "n_phonon": self.n_phonon.tolist(),
                },
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "TrajectoryRecord":
        d = json.loads(line)
        s = d["samples"]
        return cls(
            master_seed=d["master_seed"],
            index=d["index"],
            params=ModelParams(**d["params"]),
            frame=d["frame"],
            t_final=d["t_final"],
            dt=d["dt"],
            times=np.asarray(s["t"], dtype=float),
            n_photon=np.asarray(s["n_photon"], dtype=float),
            n_phonon=np.asarray(s["n_phonon"], dtype=float),
            jumps=tuple(
                JumpEvent(j["t"], j["channel"], j["n_photon"], j["n_phonon"]) for j in d["jumps"]
            ),
            final_state=d["final_state"],
            rng=d["rng"],
        )


def make_rng(master_seed: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(index,))))


def default_dt(p: ModelParams, steps_per_period: int = 2000) -> float:
    """Grid step of one Rabi period ``2 pi / Omega_eff`` over ``steps_per_period``."""
    return float(2 * np.pi / effective_rabi(p) / steps_per_period)


class JumpEngine:
    """No-jump propagator and jump operators for one parameter set and frame.

    Built once and shared read-only by every trajectory of an ensemble.
    """

    def __init__(self, p: ModelParams, space: FockSpace, frame: str = "rotating"):
        self.p = p
        self.space = space
        self.frame = frame
        self.na = space.photon_numbers()
        self.nb = space.phonon_numbers()
        self.decay = p.gamma_a * self.na + p.gamma_b * self.nb
        self.H = frame_hamiltonian(p, space, frame)
        self.Hnh = self.H - 0.5j * np.diag(self.decay)
        self.prop = SpectralPropagator(self.Hnh, hermitian=False)
        self.ops = {"cavity": annihilation_cavity(space), "mechanical": annihilation_mech(space)}
        self.rates = {"cavity": p.gamma_a, "mechanical": p.gamma_b}

    # -- no-jump evolution --------------------------------------------------
    def coefficients(self, psi: np.ndarray):
        """Modal expansion of ``psi`` restricted to non-negligible modes."""
        if self.prop.fallback:
            return None
        c = self.prop.coefficients(psi)
        keep = np.abs(c) > 1e-15 * np.abs(c).max()
        return self.prop.eigenvalues[keep], self.prop.V[:, keep], c[keep]

    def evolve(self, psi: np.ndarray, modes, tau):
        """Unnormalized no-jump state(s) a time ``tau`` after ``psi``."""
        if modes is None:
            return self.prop.apply(psi, tau)
        lam, V, c = modes
        tau = np.asarray(tau, dtype=float)
        if tau.ndim == 0:
            return V @ (np.exp(-1j * lam * float(tau)) * c)
        return V @ (np.exp(-1j * np.outer(lam, tau)) * c[:, None])

    def populations(self, states: np.ndarray):
        """Norm^2, photon number, phonon number and loss rate of state column(s)."""
        pop = np.abs(states) ** 2
        norm = pop.sum(axis=0)
        safe = np.where(norm > 0, norm, 1.0)
        return norm, (self.na @ pop) / safe, (self.nb @ pop) / safe, (self.decay @ pop) / safe

    def channel_probabilities(self, psi: np.ndarray) -> np.ndarray:
        pop = np.abs(psi) ** 2
        w = np.array([self.p.gamma_a * (self.na @ pop), self.p.gamma_b * (self.nb @ pop)])
        total = w.sum()
        if total <= 0:
            raise TrajectoryError("jump requested from a state with zero loss rate")
        return w / total

    def jump(self, psi: np.ndarray, channel: str) -> np.ndarray:
        out = self.ops[channel] @ psi
        return out / np.linalg.norm(out)


def _label(space: FockSpace, psi: np.ndarray) -> str:
    pop = np.abs(psi) ** 2
    pop = pop / pop.sum()
    i = int(np.argmax(pop))
    n, k = divmod(i, space.n_mech)
    return f"|{n},{k}>" if pop[i] > 0.999 else f"|{n},{k}>~{pop[i]:.3f}"


def run_trajectory(
    p: ModelParams,
    space: FockSpace,
    psi0: np.ndarray,
    t_final: float,
    dt: float,
    seed: int = 0,
    frame: str = "rotating",
    record_every: int = 20,
    index: int = 0,
    engine: JumpEngine | None = None,
    chunk: int = 1024,
    max_jumps: int | None = None,
) -> TrajectoryRecord:
    """One quantum-jump trajectory by the waiting-time method.

    The no-jump state is evaluated on the grid ``k * dt`` (one spectral
    application per point, no error accumulation) until its norm^2 drops
    below ``r1``; the crossing is then refined by Brent's method on the
    continuous propagator. ``dt`` must keep the per-step jump probability
    at most 0.1. Expectations are recorded every ``record_every`` grid
    points. The random stream is ``make_rng(seed, index)``. With
    ``max_jumps`` set, jumps stop after that many and the no-jump evolution
    runs on to ``t_final``.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.vdot(psi0, psi0).real - 1) > 1e-10:
        raise ValueError("psi0 must be normalized")
    if dt <= 0 or t_final <= 0:
        raise ValueError("dt and t_final must be positive")
    eng = engine if engine is not None else JumpEngine(p, space, frame)
    rng = make_rng(seed, index)
    n_grid = int(np.ceil(t_final / dt - 1e-9))
    grid = np.minimum(np.arange(n_grid + 1) * dt, t_final)
    rec_idx = np.unique(np.r_[np.arange(0, n_grid + 1, record_every), n_grid])
    rec_times = grid[rec_idx]

    out_na = np.empty(len(rec_times))
    out_nb = np.empty(len(rec_times))
    jumps: list[JumpEvent] = []
    t0, psi = 0.0, psi0
    rec_pos = 0  # next recording slot to fill

    def fill_records(t_start, t_stop, psi_s, modes, inclusive):
        nonlocal rec_pos
        hi = np.searchsorted(rec_times, t_stop, side="right" if inclusive else "left")
        if hi > rec_pos:
            st = eng.evolve(psi_s, modes, rec_times[rec_pos:hi] - t_start)
            _, na, nb, _ = eng.populations(st)
            out_na[rec_pos:hi], out_nb[rec_pos:hi] = na, nb
            rec_pos = hi

    while True:
        r1 = rng.random()
        modes = eng.coefficients(psi)
        # norm is non-increasing, so a jump happens before t_final iff the end norm is below r1
        end_norm = float(np.sum(np.abs(eng.evolve(psi, modes, t_final - t0)) ** 2))
        if end_norm >= r1 or (max_jumps is not None and len(jumps) >= max_jumps):
            _check_steps(eng, psi, modes, grid, t0, t_final, dt, chunk)
            fill_records(t0, t_final, psi, modes, inclusive=True)
            psi_end = eng.evolve(psi, modes, t_final - t0)
            break
        lo, hi = _bracket(eng, psi, modes, grid, t0, r1, dt, chunk)
        t_jump = brentq(
            lambda t: float(np.sum(np.abs(eng.evolve(psi, modes, t - t0)) ** 2)) - r1,
            lo, hi, xtol=1e-12 * max(dt, 1.0), rtol=1e-12, maxiter=200,
        )
        if not t_jump > t0:
            raise PropagatorDefectError(f"jump time {t_jump} does not advance past {t0}")
        fill_records(t0, t_jump, psi, modes, inclusive=False)
        pre = eng.evolve(psi, modes, t_jump - t0)
        pre = pre / np.linalg.norm(pre)
        _, na, nb, _ = eng.populations(pre)
        probs = eng.channel_probabilities(pre)
        r2 = rng.random()
        channel = CHANNELS[0] if r2 < probs[0] else CHANNELS[1]
        jumps.append(JumpEvent(float(t_jump), channel, float(na), float(nb)))
        psi = eng.jump(pre, channel)
        t0 = float(t_jump)

    return TrajectoryRecord(
        master_seed=int(seed), index=int(index), params=p, frame=eng.frame,
        t_final=float(t_final), dt=float(dt), times=rec_times, n_photon=out_na,
        n_phonon=out_nb, jumps=tuple(jumps), final_state=_label(space, psi_end),
    )


def _grid_after(grid: np.ndarray, t0: float) -> int:
    return int(np.searchsorted(grid, t0, side="right"))


def _scan(eng, psi, modes, taus, dt):
    states = eng.evolve(psi, modes, taus)
    norm, _, _, rate = eng.populations(states)
    dp = dt * rate
    if dp.max(initial=0.0) > MAX_STEP_PROBABILITY:
        raise DtTooLargeError(
            f"jump probability per step {dp.max():.3g} > {MAX_STEP_PROBABILITY}: dt too large "
            f"(use dt <= {MAX_STEP_PROBABILITY / rate.max():.4g})"
        )
    return norm


def _check_steps(eng, psi, modes, grid, t0, t_final, dt, chunk):
    """Apply the per-step probability guard on the rest of the grid."""
    start = _grid_after(grid, t0)
    taus = np.r_[0.0, grid[start:] - t0]
    # decimated check: the loss rate of the normalized state changes on Rabi scales, not per step
    stride = max(1, len(taus) // (4 * chunk))
    norm = _scan(eng, psi, modes, taus[::stride], dt)
    if np.any(np.diff(norm) > 1e-10):
        raise PropagatorDefectError("no-jump norm increased")


def _bracket(eng, psi, modes, grid, t0, r1, dt, chunk):
    """Grid interval in which the no-jump norm^2 first drops below ``r1``."""
    start = _grid_after(grid, t0)
    prev_t, prev_norm = t0, 1.0
    for s in range(start, len(grid), chunk):
        ts = grid[s : s + chunk]
        norm = _scan(eng, psi, modes, ts - t0, dt)
        if np.any(np.diff(np.r_[prev_norm, norm]) > 1e-10):
            raise PropagatorDefectError("no-jump norm increased")
        below = np.nonzero(norm < r1)[0]
        if below.size:
            j = int(below[0])
            lo = ts[j - 1] if j > 0 else prev_t
            return float(lo), float(ts[j])
        prev_t, prev_norm = float(ts[-1]), float(norm[-1])
    raise PropagatorDefectError("norm crossing predicted but not found on the grid")


def run_trajectory_per_step(
    p: ModelParams,
    space: FockSpace,
    psi0: np.ndarray,
    t_final: float,
    dt: float,
    seed: int = 0,
    frame: str = "rotating",
    index: int = 0,
    max_jumps: int | None = None,
) -> TrajectoryRecord:
    """Fixed-step unraveling: a fresh ``r1`` every step, jump when ``r1 < dp``.

    ``dp = dt * sum_m gamma_m <C_m^+ C_m>``; without a jump the state is
    stepped with ``exp(-i H_nh dt)`` and renormalized. Jump times are
    resolved only to the step, so this form carries an O(dt) timing bias.
    """
    eng = JumpEngine(p, space, frame)
    try:
        U = fixed_step_propagator(eng.Hnh, dt)
    except StepTooLargeError as exc:
        raise DtTooLargeError(f"dt too large for the fixed-step propagator: {exc}") from exc
    rng = make_rng(seed, index)
    psi = np.asarray(psi0, dtype=complex)
    n_steps = int(np.ceil(t_final / dt - 1e-9))
    jumps: list[JumpEvent] = []
    times, out_na, out_nb = [0.0], [], []
    _, na, nb, rate = eng.populations(psi)
    out_na.append(float(na))
    out_nb.append(float(nb))
    for step in range(n_steps):
        dp = dt * float(rate)
        if dp > MAX_STEP_PROBABILITY:
            raise DtTooLargeError(f"jump probability per step {dp:.3g} > {MAX_STEP_PROBABILITY}: dt too large")
        r1 = rng.random()
        r2 = rng.random()
        t_next = (step + 1) * dt
        if r1 < dp and (max_jumps is None or len(jumps) < max_jumps):
            probs = eng.channel_probabilities(psi)
            channel = CHANNELS[0] if r2 < probs[0] else CHANNELS[1]
            jumps.append(JumpEvent(t_next, channel, float(na), float(nb)))
            psi = eng.jump(psi, channel)
            if max_jumps is not None and len(jumps) >= max_jumps:
                times.append(t_next)
                _, na, nb, rate = eng.populations(psi)
                out_na.append(float(na))
                out_nb.append(float(nb))
                break
        else:
            psi = U @ psi
            psi = psi / np.linalg.norm(psi)
        _, na, nb, rate = eng.populations(psi)
        times.append(t_next)
        out_na.append(float(na))
        out_nb.append(float(nb))
    return TrajectoryRecord(
        master_seed=int(seed), index=int(index), params=p, frame=frame, t_final=float(t_final),
        dt=float(dt), times=np.asarray(times), n_photon=np.asarray(out_na),
        n_phonon=np.asarray(out_nb), jumps=tuple(jumps), final_state=_label(space, psi),
        rng=RNG_ALGORITHM,
    )


@dataclass(frozen=True)
class _Batch:
    p: ModelParams
    space: FockSpace
    psi0: np.ndarray
    t_final: float
    dt: float
    master_seed: int
    frame: str
    record_every: int


def _run_batch(indices, batch: _Batch):
    eng = JumpEngine(batch.p, batch.space, batch.frame)
    out = []
    for i in indices:
        try:
            out.append(
                run_trajectory(
                    batch.p, batch.space, batch.psi0, batch.t_final, batch.dt,
                    seed=batch.master_seed, frame=batch.frame, record_every=batch.record_every,
                    index=i, engine=eng,
                )
            )
        except Exception as exc:  # noqa: BLE001 - re-raised with the index attached
            raise TrajectoryError(f"trajectory {i}: {exc}") from exc
    return out


def run_ensemble(
    p: ModelParams,
    space: FockSpace,
    psi0: np.ndarray,
    t_final: float,
    dt: float,
    master_seed: int,
    n_traj: int,
    frame: str = "rotating",
    record_every: int = 20,
    workers: int = 1,
) -> list[TrajectoryRecord]:
    """``n_traj`` independent trajectories, ordered by index.

    Trajectory ``i`` draws from ``make_rng(master_seed, i)``, so the
    ensemble is identical for any ``workers``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    batch = _Batch(p, space, np.asarray(psi0, dtype=complex), t_final, dt, master_seed, frame, record_every)
    n_chunks = max(1, min(n_traj, 4 * max(1, workers)))
    chunks = [list(c) for c in np.array_split(np.arange(n_traj), n_chunks) if len(c)]
    results = pmap(partial(_run_batch, batch=batch), chunks, workers)
    return [r for chunk in results for r in chunk]


def no_jump_trace(
    p: ModelParams, space: FockSpace, psi0: np.ndarray, times, frame: str = "rotating"
):
    """Normalized photon and phonon numbers of the no-jump state, plus its norm^2."""
    eng = JumpEngine(p, space, frame)
    psi0 = np.asarray(psi0, dtype=complex)
    states = eng.evolve(psi0, eng.coefficients(psi0), np.asarray(times, dtype=float))
    norm, na, nb, _ = eng.populations(states)
    return na, nb, norm


def write_jsonl(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.to_json())
            fh.write("\n")


def read_jsonl(path) -> list[TrajectoryRecord]:
    with open(path) as fh:
        return [TrajectoryRecord.from_json(line) for line in fh if line.strip()]


def write_trajectory_csv(record: TrajectoryRecord, path) -> None:
    from .dynamics import write_expectation_csv

    write_expectation_csv(record.times, record.n_photon, record.n_phonon, path)
