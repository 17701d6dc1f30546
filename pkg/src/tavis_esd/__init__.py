"""Two atoms with XY exchange in a detuned single-mode cavity.

Closed-form and RK4 propagation of the excitation blocks, Wootters
entanglement of the atomic pair, sudden-death detection and figure
datasets.
"""
from .analytic import (AnalyticPropagator, BlockCouplings, BlockSpectrum,
                       DegenerateSpectrumError, NumericalError, characteristic_roots,
                       delta_coefficients, evolve_block, evolve_state, mu_eta)
from .esd import (EsdInterval, EsdReport, RevivalPeak, Series, TimeGrid, analyze, build_initial,
                  collapse_intervals, death_fraction, detect_esd_intervals,
                  detect_revival_peaks, first_plateau, make_propagator, scan, sweep,
                  sync_overlap)
from .model import (PRESETS, AtomicAmplitudes, FockTruncation, JointState, LowBlockPolicy,
                    SystemParams, TruncationError, assemble_initial, block_norm,
                    choose_cutoff, coherent_weights, preset_state, total_norm)
from .observables import (concurrence, entanglement_of_formation, population_inversion,
                          reduced_density, reduced_density_direct, single_atom_density)
from .oracle import AccuracyError, IntegratorConfig, OraclePropagator

__version__ = "0.1.0"
