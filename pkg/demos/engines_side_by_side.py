# The closed-form engine against plain RK4 on the block equations. Small
# photon numbers keep the integrator quick.

import time

import numpy as np

from tavis_esd import SystemParams, TimeGrid, build_initial, make_propagator, preset_state
from tavis_esd.observables import concurrence, reduced_density

params = SystemParams(lambda2=2.0, detuning=1.5, nbar=5.0)
state0 = build_initial(params, preset_state("w_like"))
taus = TimeGrid(0.0, 30.0, 1201).taus()
print(f"Fock cutoff {state0.truncation.n_max}, tail mass {state0.truncation.tail_mass:.1e}")

out = {}
for engine in ("analytic", "oracle"):
    t0 = time.perf_counter()
    out[engine] = make_propagator(state0, params, engine).evolve(taus)
    print(f"{engine:>8}: {time.perf_counter() - t0:.3f} s")

a, o = out["analytic"], out["oracle"]
print(f"max block amplitude gap {np.max(np.abs(a.blocks - o.blocks)):.2e}")
print(f"max low amplitude gap   {np.max(np.abs(a.low - o.low)):.2e}")

ca = concurrence(reduced_density(a)).concurrence
co = concurrence(reduced_density(o)).concurrence
print(f"max concurrence gap     {np.max(np.abs(ca - co)):.2e}")
for k in range(0, taus.size, 150):
    print(f"  tau {taus[k]:5.2f}   C {ca[k]:.10f}  {co[k]:.10f}")
