"""
First emissions and bundles
===========================

Which channel emits first depends on the loss rates. Bundles are quanta
of one channel leaving within one lifetime of each other; free decay of a
Fock state gives the reference probabilities.
"""

import numpy as np

from casimir_rabi import ModelParams
from casimir_rabi.emission import free_dissipation_baseline, rate_scan

stats = rate_scan(ModelParams.resonant(1e-3), [5.0, 1.0, 0.2], n_traj=200, master_seed=42)
for s in stats:
    print(f"gamma_b/gamma_a = {s.meta['ratio']:>3}: photon first {s.fraction('PtBE'):.3f}, "
          f"2PtBE/PtBE {s.fraction('2PtBE', 'PtBE'):.3f}, 2PnBE/PnBE {s.fraction('2PnBE', 'PnBE'):.3f}")

s = stats[1]
edges, counts = s.histograms["mechanical"]
print("phonon number just before a phonon-first emission:")
for lo, c in zip(edges[:-1], counts):
    print(f"  [{lo:.1f}, {lo + 0.5:.1f}): {c}")

free = free_dissipation_baseline((2, 0), 1e-9, 1e-9, 5000, master_seed=1)
print(f"free |2,0>: 2PtBE/PtBE = {free.fraction('2PtBE', 'PtBE'):.4f} (1 - 1/e = {1 - np.exp(-1):.4f})")
