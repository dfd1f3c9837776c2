"""
Sensing the cavity frequency
============================

After one population cycle, pi / Omega_eff, the state is very sensitive
to omega_c near the resonance, where the quantum Fisher information
exceeds 1e16.
"""

from casimir_rabi import FockSpace, ModelParams
from casimir_rabi.qfi import locate_peak, qfi_at, qfi_exact, rabi_half_period

space = FockSpace(6, 8)
p = ModelParams(1.5, 1e-3)
t_f = rabi_half_period(p)

w, F, scans = locate_peak(p, space, t_f=t_f)
print(f"peak at omega_c = {w:.10f}, F = {F:.3e}, peak/edge = {scans[0].peak_to_edge(F):.1f}")

# Finite differences against the eigenbasis formula
for off in (-2.0, 0.0, 2.0):
    pw = p.replace(omega_c=w + off * 3.1e-8)
    print(f"offset {off:+.0f} Omega: fd {qfi_at(pw, space, space.ket(0, 3), t_f):.4e}, "
          f"exact {qfi_exact(pw, space, space.ket(0, 3), t_f):.4e}")

# No coupling, no information
print("g = 0:", qfi_at(p.replace(g=0.0, omega_c=w), space, space.ket(0, 3), t_f))
