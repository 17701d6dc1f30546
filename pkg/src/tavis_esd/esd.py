"""Time scans, sudden-death intervals, revival peaks and parameter sweeps.

A scan samples concurrence, entanglement of formation and the first atom's
inversion on a uniform grid. Death intervals are the maximal runs where the
clamped concurrence is exactly zero; their endpoints are refined by
bisecting on the sign of the unclamped Wootters combination.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import grey_closing, maximum_filter1d, minimum_filter1d
from scipy.signal import find_peaks, peak_widths

from .analytic import AnalyticPropagator
from .model import (AtomicAmplitudes, FockTruncation, JointState, LowBlockPolicy,
                    SystemParams, assemble_initial, choose_cutoff, total_norm)
from .observables import (concurrence, concurrence_margin, population_inversion,
                          reduced_density)
from .oracle import IntegratorConfig, OraclePropagator

__all__ = [
    "Engine",
    "TimeGrid",
    "Series",
    "EsdInterval",
    "RevivalPeak",
    "EsdReport",
    "SweepRow",
    "build_initial",
    "make_propagator",
    "scan",
    "detect_esd_intervals",
    "detect_revival_peaks",
    "collapse_intervals",
    "sync_overlap",
    "death_fraction",
    "analyze",
    "first_plateau",
    "sweep",
]

log = logging.getLogger(__name__)

BISECT_RESOLUTION = 1e-4
COLLAPSE_FRACTION = 0.05
ENVELOPE_WINDOW = 1.0


class Engine(str, Enum):
    ANALYTIC = "analytic"
    ORACLE = "oracle"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``linspace(tau_start, tau_end, samples)``.

    A single sample is allowed only as the degenerate grid
    ``tau_start == tau_end``.
    """

    tau_start: float
    tau_end: float
    samples: int

    def __post_init__(self):
        if not (math.isfinite(self.tau_start) and math.isfinite(self.tau_end)):
            raise ValueError("grid bounds must be finite")
        if self.tau_start < 0:
            raise ValueError("tau_start must be >= 0")
        if int(self.samples) != self.samples:
            raise ValueError("samples must be an integer")
        if self.samples == 1 and self.tau_end == self.tau_start:
            return
        if self.samples < 2:
            raise ValueError("samples must be >= 2")
        if not self.tau_end > self.tau_start:
            raise ValueError("tau_end must exceed tau_start")

    @classmethod
    def parse(cls, text: str) -> "TimeGrid":
        """``"START:END:SAMPLES"``."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} is not START:END:SAMPLES")
        return cls(float(parts[0]), float(parts[1]), int(parts[2]))

    @classmethod
    def default(cls, tau_end: float, tau_start: float = 0.0, density: int = 40) -> "TimeGrid":
        """Grid with ``density`` samples per unit tau."""
        return cls(tau_start, tau_end, int(round(density * (tau_end - tau_start))) + 1)

    @property
    def step(self) -> float:
        return (self.tau_end - self.tau_start) / (self.samples - 1) if self.samples > 1 else 0.0

    @property
    def span(self) -> float:
        return self.tau_end - self.tau_start

    def taus(self) -> np.ndarray:
        return np.linspace(self.tau_start, self.tau_end, self.samples)

    def __str__(self):
        return f"{self.tau_start:g}:{self.tau_end:g}:{self.samples}"


@dataclass(frozen=True)
class EsdInterval:
    tau_on: float
    tau_off: float
    refined: bool = True

    def __post_init__(self):
        if not self.tau_off > self.tau_on:
            raise ValueError("tau_off must exceed tau_on")

    @property
    def length(self) -> float:
        return self.tau_off - self.tau_on


@dataclass(frozen=True)
class RevivalPeak:
    tau_peak: float
    height: float
    fwhm: float

    def __post_init__(self):
        if not self.height > 0:
            raise ValueError("peak height must be positive")


@dataclass
class EsdReport:
    intervals: list
    peaks: list
    death_fraction: float
    sync_overlap: float

    def to_dict(self) -> dict:
        return {
            "intervals": [asdict(i) for i in self.intervals],
            "peaks": [asdict(p) for p in self.peaks],
            "death_fraction": self.death_fraction,
            "sync_overlap": self.sync_overlap,
        }


@dataclass
class Series:
    """Observables sampled on a grid.

    ``norm`` is the retained probability (squared state norm) and
    ``margin`` the unclamped ``eps1 - eps2 - eps3 - eps4``;
    ``margin_at`` re-evaluates it at arbitrary ``tau`` (used for bisection).
    """

    tau: np.ndarray
    concurrence: np.ndarray
    eof: np.ndarray
    sigma_z: np.ndarray
    norm: np.ndarray
    margin: np.ndarray
    dropped_mass: float = 0.0
    margin_at: Callable | None = field(default=None, repr=False, compare=False)

    def __len__(self):
        return self.tau.size


def build_initial(params: SystemParams, atomic: AtomicAmplitudes, tail_eps: float = 1e-12,
                  policy: LowBlockPolicy = LowBlockPolicy.NUMERIC_EXACT) -> JointState:
    n_max = choose_cutoff(params.nbar, tail_eps)
    trunc = FockTruncation(n_max, LowBlockPolicy(policy), tolerance=max(tail_eps, 1e-12))
    return assemble_initial(atomic, params, trunc)


def make_propagator(initial: JointState, params: SystemParams, engine="analytic",
                    oracle_config: IntegratorConfig | None = None):
    engine = Engine(engine)
    if engine is Engine.ANALYTIC:
        return AnalyticPropagator(initial, params, oracle_config)
    return OraclePropagator(initial, params, oracle_config)


def _normalized_rho(state: JointState):
    rho = reduced_density(state)
    tr = np.real(np.trace(rho, axis1=-2, axis2=-1))
    return rho / tr[..., None, None], tr


def scan(params: SystemParams, atomic: AtomicAmplitudes, grid: TimeGrid, engine="analytic",
         tail_eps: float = 1e-12, policy: LowBlockPolicy = LowBlockPolicy.NUMERIC_EXACT,
         oracle_config: IntegratorConfig | None = None) -> Series:
    """Evaluate all observables on ``grid`` with one propagator.

    The reduced density matrix is divided by its trace, so truncation loss
    does not leak into the concurrence.
    """
    initial = build_initial(params, atomic, tail_eps, policy)
    prop = make_propagator(initial, params, engine, oracle_config)
    taus = grid.taus()
    state = prop.evolve(taus)
    rho, tr = _normalized_rho(state)
    ent = concurrence(rho)
    sz = population_inversion(state) / tr

    def margin_at(tau):
        rho_t, _ = _normalized_rho(prop.evolve(np.atleast_1d(float(tau))))
        return float(concurrence_margin(rho_t)[0])

    trunc = initial.truncation
    return Series(taus, ent.concurrence, ent.eof, sz, total_norm(state), ent.margin,
                  dropped_mass=trunc.dropped_mass + trunc.tail_mass, margin_at=margin_at)


def _bisect(f, lo, hi, lo_dead: bool):
    """Shrink ``[lo, hi]`` around the sign change of ``f``; ``lo_dead`` says which side is <= 0."""
    while hi - lo > BISECT_RESOLUTION:
        mid = 0.5 * (lo + hi)
        if (f(mid) <= 0) == lo_dead:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _runs(mask: np.ndarray):
    """Start/stop (inclusive) indices of the True runs of ``mask``."""
    m = np.concatenate([[False], mask, [False]]).astype(np.int8)
    d = np.diff(m)
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1) - 1))


def detect_esd_intervals(series: Series, params: SystemParams | None = None,
                         atomic: AtomicAmplitudes | None = None, engine="analytic",
                         refine: bool = True) -> list:
    """Maximal runs of exactly zero concurrence with bisected endpoints.

    Interior endpoints are located to within 1e-4 in tau using the sign of
    the unclamped margin. Runs whose refined length is under two grid steps
    are dropped. When ``series`` carries no evaluator, one is rebuilt from
    ``params`` and ``atomic``; without either, endpoints stay on the grid and
    ``refined`` is False.
    """
    tau = np.asarray(series.tau, dtype=float)
    dead = np.asarray(series.concurrence) == 0.0
    if tau.size < 2:
        return []
    dt = tau[1] - tau[0]
    f = series.margin_at
    if refine and f is None and params is not None and atomic is not None:
        prop = make_propagator(build_initial(params, atomic), params, engine)

        def f(t):
            rho_t, _ = _normalized_rho(prop.evolve(np.atleast_1d(float(t))))
            return float(concurrence_margin(rho_t)[0])
    out = []
    for i, j in _runs(dead):
        on, off = tau[i], tau[j]
        ok = True
        if i > 0:
            if refine and f is not None:
                on = _bisect(f, tau[i - 1], tau[i], lo_dead=False)
            else:
                ok = False
        if j < tau.size - 1:
            if refine and f is not None:
                off = _bisect(f, tau[j], tau[j + 1], lo_dead=True)
            else:
                ok = False
        if off - on < 2 * dt * (1 - 1e-9):
            continue
        out.append(EsdInterval(float(on), float(off), bool(ok and (i > 0 or j < tau.size - 1))))
    return out


def _upper_envelope(tau, y, window=ENVELOPE_WINDOW):
    """Line through the local maxima, capped by a flat closing of ``y``.

    The closing fills only valleys narrower than ``window``, so wide gaps
    that straight segments between distant maxima would bridge survive.
    """
    idx, _ = find_peaks(y)
    knots = np.concatenate([[0], idx, [y.size - 1]])
    env = np.maximum(np.interp(tau, tau[knots], y[knots]), y)
    size = max(1, int(round(window / (tau[1] - tau[0]))) + 1)
    return np.minimum(env, grey_closing(y, size=size, mode="nearest"))


def detect_revival_peaks(series, min_height: float = 0.01) -> list:
    """Envelope peaks of the E_f series.

    ``series`` is a :class:`Series` or a ``(tau, values)`` pair. The upper
    envelope joins the local maxima; its peaks above ``min_height`` get a
    full width at half maximum, and a peak lying within one FWHM of a
    taller one is absorbed by it.
    """
    if isinstance(series, Series):
        tau, y = series.tau, series.eof
    else:
        tau, y = series
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    if min_height <= 0:
        raise ValueError("min_height must be positive")
    if y.size < 3:
        return []
    env = _upper_envelope(tau, y)
    idx, props = find_peaks(env, height=min_height)
    if idx.size == 0:
        return []
    widths = peak_widths(env, idx, rel_height=0.5)[0] * (tau[1] - tau[0])
    kept = []
    for k in np.argsort(-props["peak_heights"], kind="stable"):
        if all(abs(tau[idx[k]] - tau[idx[q]]) > widths[q] for q in kept):
            kept.append(k)
    kept.sort()
    # the cap flattens envelope tops; report the raw maximum under each one
    half = int(round(0.5 * ENVELOPE_WINDOW / (tau[1] - tau[0])))
    out = []
    for k in kept:
        lo = max(0, idx[k] - half)
        j = lo + int(np.argmax(y[lo:idx[k] + half + 1]))
        out.append(RevivalPeak(float(tau[j]), float(max(env[idx[k]], y[j])), float(widths[k])))
    return out


def collapse_intervals(tau, sigma_z=None, window: float = 2.0) -> list:
    """Spans where the moving peak-to-peak of sigma_z is at most 5% of the global one.

    Accepts a :class:`Series` or ``(tau, sigma_z)``. The window is centred
    and ``window`` wide in tau.
    """
    if isinstance(tau, Series):
        tau, sigma_z = tau.tau, tau.sigma_z
    if window <= 0:
        raise ValueError("window must be positive")
    tau = np.asarray(tau, dtype=float)
    s = np.asarray(sigma_z, dtype=float)
    if tau.size < 2:
        return []
    dt = tau[1] - tau[0]
    size = max(1, int(round(window / dt)) + 1)
    p2p = maximum_filter1d(s, size, mode="nearest") - minimum_filter1d(s, size, mode="nearest")
    quiet = p2p <= COLLAPSE_FRACTION * (s.max() - s.min())
    return [(float(tau[i]), float(tau[j])) for i, j in _runs(quiet) if j > i]


def _measure(spans):
    """Total length of a union of intervals."""
    spans = sorted((a, b) for a, b in spans if b > a)
    total, cur_a, cur_b = 0.0, None, None
    for a, b in spans:
        if cur_b is None or a > cur_b:
            if cur_b is not None:
                total += cur_b - cur_a
            cur_a, cur_b = a, b
        else:
            cur_b = max(cur_b, b)
    if cur_b is not None:
        total += cur_b - cur_a
    return total


def _intersection(xs, ys):
    return [(max(a, c), min(b, d)) for a, b in xs for c, d in ys if min(b, d) > max(a, c)]


def sync_overlap(esd, collapse) -> float:
    """Jaccard index of two interval sets (1.0 when both are empty)."""
    xs = [(i.tau_on, i.tau_off) if isinstance(i, EsdInterval) else tuple(i) for i in esd]
    ys = [tuple(c) for c in collapse]
    union = _measure(xs + ys)
    if union == 0.0:
        return 1.0
    return min(1.0, _measure(_intersection(xs, ys)) / union)


def death_fraction(intervals, grid_span: float) -> float:
    if grid_span <= 0:
        return 0.0
    return min(1.0, _measure([(i.tau_on, i.tau_off) for i in intervals]) / grid_span)


def analyze(series: Series, min_height: float = 0.01, window: float = 2.0) -> EsdReport:
    intervals = detect_esd_intervals(series)
    peaks = detect_revival_peaks(series, min_height)
    span = float(series.tau[-1] - series.tau[0]) if len(series) > 1 else 0.0
    coll = collapse_intervals(series, window=window)
    return EsdReport(intervals, peaks, death_fraction(intervals, span),
                     sync_overlap(intervals, coll))


def first_plateau(series: Series, window: float = 2.0):
    """Quiet span between the initial decay and the first revival.

    Starts where the first population collapse starts and ends at the
    earlier of that collapse's end and the first revival peak minus its
    FWHM. Returns ``None`` when no collapse is found.
    """
    coll = collapse_intervals(series, window=window)
    if not coll:
        return None
    on, off = coll[0]
    for p in detect_revival_peaks(series):
        if p.tau_peak > on:
            off = min(off, p.tau_peak - p.fwhm)
            break
    return (on, off) if off > on else None


@dataclass
class SweepRow:
    value: float
    death_fraction: float = math.nan
    n_intervals: int = 0
    first_onset: float = math.nan
    first_length: float = math.nan
    first_peak_tau: float = math.nan
    first_peak_height: float = math.nan
    sync_overlap: float = math.nan
    error: str = ""


AXES = ("lambda2", "detuning", "nbar")


def _sweep_row(args) -> SweepRow:
    base, atomic, grid, axis, value, engine, tail_eps = args
    try:
        params = base.replace(**{axis: value})
        rep = analyze(scan(params, atomic, grid, engine, tail_eps))
    except Exception as exc:  # recorded per row; the sweep goes on
        log.warning("sweep %s=%g failed: %s", axis, value, exc)
        return SweepRow(value, error=f"{type(exc).__name__}: {exc}")
    row = SweepRow(value, rep.death_fraction, len(rep.intervals), sync_overlap=rep.sync_overlap)
    if rep.intervals:
        row.first_onset = rep.intervals[0].tau_on
        row.first_length = rep.intervals[0].length
    if rep.peaks:
        row.first_peak_tau = rep.peaks[0].tau_peak
        row.first_peak_height = rep.peaks[0].height
    return row


def sweep(base: SystemParams, atomic: AtomicAmplitudes, grid: TimeGrid, axis: str,
          values: Sequence[float], engine="analytic", jobs: int = 1,
          tail_eps: float = 1e-12) -> list:
    """One scan and report per axis value, rows in the order of ``values``."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    values = [float(v) for v in values]
    if not values or not all(math.isfinite(v) for v in values):
        raise ValueError("sweep values must be finite and non-empty")
    tasks = [(base, atomic, grid, axis, v, Engine(engine).value, tail_eps) for v in values]
    if jobs <= 1 or len(tasks) == 1:
        return [_sweep_row(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_sweep_row, tasks))
