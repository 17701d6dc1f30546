# Two states that never quite die: the anticorrelated Bell pair and the
# uniform product state with weak dipole coupling. Between the collapse and
# the first revival the entanglement sits on a very low plateau.

import numpy as np

from tavis_esd import SystemParams, TimeGrid, analyze, first_plateau, preset_state, scan

cases = [("bell_anticorrelated", SystemParams(nbar=100.0)),
         ("uniform_L", SystemParams(lambda2=0.2, nbar=100.0))]

for name, params in cases:
    s = scan(params, preset_state(name), TimeGrid(0.0, 100.0, 4001))
    rep = analyze(s)
    span = first_plateau(s)
    print(f"\n{name}  ({params})")
    print(f"  zero-concurrence runs: {len(rep.intervals)}, death fraction {rep.death_fraction:.4f}")
    if span is None:
        print("  no collapse found")
        continue
    m = (s.tau >= span[0]) & (s.tau <= span[1])
    e = s.eof[m]
    print(f"  plateau {span[0]:.2f} .. {span[1]:.2f}")
    print(f"  E_f median {np.median(e):.3e}, min {e.min():.3e}, max {e.max():.3e}")
    nz = e[e > 0]
    if nz.size:
        print(f"  smallest nonzero E_f {nz.min():.3e}")
