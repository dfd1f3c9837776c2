"""
Quantum-jump trajectories with photon and phonon loss
=====================================================

Each trajectory evolves under the non-Hermitian Hamiltonian until its norm
falls below a uniform random number, then emits a photon or a phonon. The
average over many trajectories reproduces the master equation.
"""

import numpy as np

from casimir_rabi import FockSpace, ModelParams, default_dt, run_ensemble, run_trajectory
from casimir_rabi.dynamics import lindblad_evolve

space = FockSpace(6, 8)
p = ModelParams.resonant(1e-3, gamma_a=1e-9, gamma_b=1e-9)
dt = default_dt(p)

# One trajectory, five lifetimes
r = run_trajectory(p, space, space.ket(0, 3), 5e9, dt, seed=42)
print("jumps of trajectory 0:")
for j in r.jumps:
    print(f"  t = {j.time:.4e}  {j.channel:<10}  <n_a> = {j.n_photon:.3f}  <n_b> = {j.n_phonon:.3f}")
print("final state", r.final_state)

# A small ensemble against the master equation on a smaller space
small = FockSpace(3, 4)
recs = run_ensemble(p, small, small.ket(0, 3), 2e9, dt, master_seed=7, n_traj=1000, record_every=1000)
samples = np.array([x.n_photon for x in recs])
n_a = samples.mean(axis=0)
err = samples.std(axis=0, ddof=1) / np.sqrt(len(recs))
rho0 = np.outer(small.ket(0, 3), small.ket(0, 3)).astype(complex)
ref = lindblad_evolve(p, small, rho0, recs[0].times[-1], 1000 * (len(recs[0].times) - 1),
                      frame="rotating", record_every=1000)
for i in range(0, len(ref.times), 4):
    print(f"t = {ref.times[i]:.3e}: trajectories {n_a[i]:.3f} +- {err[i]:.3f}, "
          f"master equation {ref.n_photon[i]:.3f}")
