"""
Casimir-Rabi oscillation and the effective model
================================================

Starting from three phonons at resonance, the exact Hamiltonian moves the
excitation into two photons and back. The effective two-body model follows
the exact evolution closely while g stays small.
"""

import numpy as np

from casimir_rabi import FockSpace, ModelParams, effective_rabi, evolve_closed
from casimir_rabi.dynamics import fidelity_trace
from casimir_rabi.model import build_exact

space = FockSpace(6, 8)
p = ModelParams.resonant(1e-3)
T_half = np.pi / effective_rabi(p)
print(f"Omega_eff = {effective_rabi(p):.4e}, populations return after pi/Omega = {T_half:.4e} / omega_m")

# Population of |2,0> over one cycle: full transfer at T/2
H = build_exact(p, space)
for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
    psi = evolve_closed(H, space.ket(0, 3), frac * T_half)
    print(f"t = {frac:4.2f} T: P(2,0) = {abs(psi[space.index(2, 0)])**2:.4f}")

# Fidelity of the effective model at fixed omega_c; larger g breaks the approximation
for g in (1e-3, 3e-3, 4e-3):
    tr = fidelity_trace(p.replace(g=g), space, space.ket(0, 3), 1.0077e8, 2001)
    print(f"g = {g:.0e}: min F = {tr.min_fidelity:.6f}")
