"""Casimir-Rabi oscillations in a cavity with a vibrating mirror.

A numpy/scipy toolkit for the |0,3> <-> |2,0> exchange between three
phonons and two photons: Hamiltonian builders on a truncated two-mode Fock
space, spectra through the avoided crossing, closed and open dynamics,
quantum-jump trajectories, emission statistics and the quantum Fisher
information with respect to the cavity frequency. Frequencies and rates
are in units of the mechanical frequency.
"""

from .fock import (
    FockSpace,
    SpectralPropagator,
    annihilation_cavity,
    annihilation_mech,
    evolve_closed,
    fixed_step_propagator,
    hermitian_eig,
    leakage_report,
)
from .model import (
    ModelParams,
    build_effective,
    build_exact,
    build_nonhermitian,
    build_rotating,
    effective_rabi,
    resonant_omega_c,
    two_level_matrix,
)
from .spectra import SpectrumSweep, locate_crossing, min_splitting, sweep
from .dynamics import fidelity_trace, lindblad_evolve, two_level_expectations
from .mcwf import JumpEvent, TrajectoryRecord, default_dt, no_jump_trace, run_ensemble, run_trajectory
from .emission import EmissionStats, classify, free_dissipation_baseline, rate_scan
from .qfi import QfiScan, locate_peak, qfi_at, qfi_exact, qfi_scan

__version__ = "0.1.0"

__all__ = [
    "FockSpace",
    "SpectralPropagator",
    "annihilation_cavity",
    "annihilation_mech",
    "evolve_closed",
    "fixed_step_propagator",
    "hermitian_eig",
    "leakage_report",
    "ModelParams",
    "build_effective",
    "build_exact",
    "build_nonhermitian",
    "build_rotating",
    "effective_rabi",
    "resonant_omega_c",
    "two_level_matrix",
    "SpectrumSweep",
    "locate_crossing",
    "min_splitting",
    "sweep",
    "fidelity_trace",
    "lindblad_evolve",
    "two_level_expectations",
    "JumpEvent",
    "TrajectoryRecord",
    "default_dt",
    "no_jump_trace",
    "run_ensemble",
    "run_trajectory",
    "EmissionStats",
    "classify",
    "free_dissipation_baseline",
    "rate_scan",
    "QfiScan",
    "locate_peak",
    "qfi_at",
    "qfi_exact",
    "qfi_scan",
]
