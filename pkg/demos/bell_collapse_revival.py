# Correlated Bell pair in a strong coherent field (nbar = 100, resonance, no
# dipole coupling). Entanglement dies within a couple of time units, stays dead
# through the population collapse, then comes back in packets.

import numpy as np

from tavis_esd import SystemParams, TimeGrid, analyze, collapse_intervals, preset_state, scan

params = SystemParams(lambda2=0.0, detuning=0.0, nbar=100.0)
series = scan(params, preset_state("bell_correlated"), TimeGrid(0.0, 100.0, 4001))
report = analyze(series)

print(f"{len(series)} samples, retained probability {series.norm.min():.15f}")
print(f"death fraction {report.death_fraction:.3f}")

# most of the zero runs are tiny gaps inside the revival packets; list the long ones
long_runs = [iv for iv in report.intervals if iv.length > 1.0]
print("\nlong ESD intervals")
for iv in long_runs:
    print(f"  {iv.tau_on:8.4f} .. {iv.tau_off:8.4f}   ({iv.length:.2f})")

print("\nenvelope peaks of E_f")
for p in report.peaks:
    print(f"  tau {p.tau_peak:6.2f}  height {p.height:.4f}  fwhm {p.fwhm:.2f}")

coll = collapse_intervals(series)
print("\nsigma_z collapse spans")
for a, b in coll:
    print(f"  {a:8.3f} .. {b:8.3f}")
print(f"sync overlap {report.sync_overlap:.3f}")

# coarse text trace of E_f, one row per 2.5 time units
print()
for t0 in np.arange(0, 100, 2.5):
    m = (series.tau >= t0) & (series.tau < t0 + 2.5)
    e = series.eof[m].max()
    print(f"{t0:6.1f} |{'#' * int(round(60 * e))}")
