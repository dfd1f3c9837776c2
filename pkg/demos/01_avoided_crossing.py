"""
Avoided crossing of |0,3> and |2,0>
===================================

Three phonons carry the same energy as two photons when 2 omega_c = 3 omega_m.
The mirror coupling mixes the two Fock states only at third order, so the
gap at the crossing is tiny: 36 sqrt(3) g^3 in units of omega_m.
"""

import numpy as np

from casimir_rabi import FockSpace, ModelParams, effective_rabi, resonant_omega_c
from casimir_rabi.spectra import locate_crossing, sweep

g = 1e-3
space = FockSpace(6, 8)
p = ModelParams(omega_c=1.5, g=g)

# A coarse survey: the two levels look like they cross
survey = sweep(p, space, (1.4995, 1.5005), 201)
gap = survey.splitting()
print(f"survey spacing {survey.ratios[1] - survey.ratios[0]:.1e}, smallest sampled gap {gap.min():.3e}")

# Zooming in resolves the minimum
ratio, split, zooms = locate_crossing(p, space)
print(f"{len(zooms) - 1} zoom levels")
print(f"minimum at omega_c/omega_m = {ratio:.10f} (closed form {resonant_omega_c(p):.10f})")
print(f"splitting {split:.4e} (closed form {2 * effective_rabi(p):.4e})")

# The gap scales as g^3
for gi in (5e-4, 1e-3, 2e-3):
    pi = ModelParams(1.5, gi)
    w = resonant_omega_c(pi)
    _, s, _ = locate_crossing(pi, space, (w - 5e-5, w + 5e-5))
    print(f"g = {gi:.0e}: splitting / g^3 = {s / gi**3:.3f}  (36 sqrt 3 = {36 * np.sqrt(3):.3f})")
