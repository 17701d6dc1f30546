"""Physical model, initial states and Fock-space bookkeeping.

The composite wavefunction is stored block by block. Block ``n`` holds the
four amplitudes

    (A_n, B_{n+1}, C_{n+1}, D_{n+2})

on ``|ee,n>, |eg,n+1>, |ge,n+1>, |gg,n+2>``. These four states share the
excitation number and the dynamics never mixes blocks. The four states that
no block covers are kept separately as "low" amplitudes in the order
``(|gg,0>, |gg,1>, |ge,0>, |eg,0>)``.

All times are scaled, ``tau = lambda1 * t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "SystemParams",
    "AtomicAmplitudes",
    "LowBlockPolicy",
    "FockTruncation",
    "JointState",
    "TruncationError",
    "PRESETS",
    "coherent_weights",
    "choose_cutoff",
    "assemble_initial",
    "preset_state",
    "total_norm",
    "block_norm",
]

# index of each low amplitude inside JointState.low
GG0, GG1, GE0, EG0 = range(4)


class TruncationError(ValueError):
    """Raised when discarded probability exceeds the configured tolerance."""


def _check_finite(**values):
    for name, v in values.items():
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class SystemParams:
    """Constants of one model instance, in units of ``lambda1``.

    Attributes
    ----------
    lambda1 : float
        Atom-field coupling. Sets the time unit.
    lambda2 : float
        Atom-atom XY exchange coupling.
    detuning : float
        ``omega0 - Omega``.
    nbar : float
        Mean photon number of the coherent field.
    alpha_phase : float
        Phase of the coherent amplitude in radians.
    """

    lambda2: float = 0.0
    detuning: float = 0.0
    nbar: float = 0.0
    alpha_phase: float = 0.0
    lambda1: float = 1.0

    def __post_init__(self):
        _check_finite(lambda1=self.lambda1, lambda2=self.lambda2,
                      detuning=self.detuning, nbar=self.nbar,
                      alpha_phase=self.alpha_phase)
        if self.lambda1 <= 0:
            raise ValueError("lambda1 must be positive")
        if self.nbar < 0:
            raise ValueError("nbar must be non-negative")

    def replace(self, **changes) -> "SystemParams":
        values = {k: getattr(self, k) for k in
                  ("lambda2", "detuning", "nbar", "alpha_phase", "lambda1")}
        values.update(changes)
        return SystemParams(**values)


@dataclass(frozen=True)
class AtomicAmplitudes:
    """Pure two-atom state ``a|ee> + b|eg> + c|ge> + d|gg>``."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        for name in "abcd":
            object.__setattr__(self, name, complex(getattr(self, name)))
        _check_finite(amplitudes=self.as_array())
        norm = float(np.sum(np.abs(self.as_array()) ** 2))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"atomic amplitudes must be normalized, |.|^2 = {norm!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d], dtype=complex)

    @classmethod
    def normalized(cls, a, b, c, d) -> "AtomicAmplitudes":
        v = np.array([a, b, c, d], dtype=complex)
        _check_finite(amplitudes=v)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ValueError("zero atomic state")
        return cls(*(v / nrm))


class LowBlockPolicy(str, Enum):
    NUMERIC_EXACT = "numeric-exact"
    TRUNCATE = "truncate"


@dataclass(frozen=True)
class FockTruncation:
    """Photon cutoff and accounting of discarded probability.

    ``dropped_mass`` is the probability of the low-excitation components
    removed by the ``truncate`` policy. ``tail_mass`` is the coherent-state
    probability beyond the retained photon range. The two are kept apart
    because they have very different sizes: the first is ``~exp(-nbar)``,
    the second is bounded by the cutoff tolerance.
    """

    n_max: int
    low_block_policy: LowBlockPolicy = LowBlockPolicy.NUMERIC_EXACT
    tolerance: float = 1e-12
    dropped_mass: float = 0.0
    tail_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "low_block_policy", LowBlockPolicy(self.low_block_policy))
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise ValueError("n_max must be an integer >= 2")
        object.__setattr__(self, "n_max", int(self.n_max))
        if self.dropped_mass < 0 or self.tail_mass < 0:
            raise ValueError("discarded masses must be non-negative")


@dataclass(frozen=True)
class JointState:
    """Composite state at one time, or at many times along a leading axis.

    ``blocks`` has shape ``(..., n_max + 1, 4)`` and ``low`` has shape
    ``(..., 4)``; ``tau`` is a scalar or an array matching the leading axes.
    """

    tau: float | np.ndarray
    blocks: np.ndarray
    low: np.ndarray
    truncation: FockTruncation = field(repr=False)

    @property
    def n_max(self) -> int:
        return self.truncation.n_max

    def at(self, index) -> "JointState":
        """Select time sample(s) from a state carrying a time axis."""
        return JointState(np.asarray(self.tau)[index], self.blocks[index],
                          self.low[index], self.truncation)

    def photon_table(self) -> np.ndarray:
        """Amplitudes as ``(..., 4, n_max + 3)``: atomic basis x photon number.

        Atomic rows are ordered ``(ee, eg, ge, gg)``.
        """
        blocks, low = self.blocks, self.low
        nb = blocks.shape[-2]
        table = np.zeros(blocks.shape[:-2] + (4, nb + 2), dtype=complex)
        table[..., 0, 0:nb] = blocks[..., 0]
        table[..., 1, 1:nb + 1] = blocks[..., 1]
        table[..., 2, 1:nb + 1] = blocks[..., 2]
        table[..., 3, 2:nb + 2] = blocks[..., 3]
        table[..., 3, 0] = low[..., GG0]
        table[..., 3, 1] = low[..., GG1]
        table[..., 2, 0] = low[..., GE0]
        table[..., 1, 0] = low[..., EG0]
        return table


PRESETS = {
    "bell_correlated": (1 / math.sqrt(2), 0, 0, 1 / math.sqrt(2)),
    "bell_anticorrelated": (0, 1 / math.sqrt(2), 1 / math.sqrt(2), 0),
    "w_like": (0, 1 / math.sqrt(3), 1 / math.sqrt(3), 1 / math.sqrt(3)),
    "excited_excited": (1, 0, 0, 0),
    "uniform_L": (0.5, 0.5, 0.5, 0.5),
}


def preset_state(name: str) -> AtomicAmplitudes:
    """Named initial atomic states used throughout the figures."""
    try:
        return AtomicAmplitudes(*PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _poisson_amplitudes(nbar: float, n_stop: int) -> np.ndarray:
    """|Q_n| for n = 0..n_stop, normalized over the full photon range.

    The value at the distribution mode is taken from log space, the rest by
    the exact two-term recurrence so that neighbouring ratios are accurate to
    rounding. The final rescale by the (numerically) complete sum removes the
    rounding of the log-space prefactor.
    """
    if nbar == 0:
        out = np.zeros(n_stop + 1)
        out[0] = 1.0
        return out
    r = math.sqrt(nbar)
    mode = int(math.floor(nbar))
    hi = max(n_stop, mode + int(40 * r) + 60)
    mags = np.zeros(hi + 1)
    mags[mode] = math.exp(0.5 * (mode * math.log(nbar) - math.lgamma(mode + 1) - nbar))
    for n in range(mode, hi):
        mags[n + 1] = mags[n] * r / math.sqrt(n + 1)
    for n in range(mode, 0, -1):
        mags[n - 1] = mags[n] * math.sqrt(n) / r
    total = math.fsum(mags ** 2)
    mags /= math.sqrt(total)
    return mags[: n_stop + 1]


def coherent_weights(nbar: float, alpha_phase: float, n_max: int) -> np.ndarray:
    """Coherent-state amplitudes ``Q_n = alpha**n / sqrt(n!) * exp(-|alpha|**2 / 2)``.

    Parameters
    ----------
    nbar : float
        ``|alpha|**2``.
    alpha_phase : float
        ``arg(alpha)``.
    n_max : int
        Last photon number returned.

    Returns
    -------
    numpy.ndarray
        Complex array of length ``n_max + 1``.
    """
    _check_finite(nbar=nbar, alpha_phase=alpha_phase)
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    mags = _poisson_amplitudes(float(nbar), int(n_max))
    if alpha_phase == 0:
        return mags.astype(complex)
    return mags * np.exp(1j * alpha_phase * np.arange(n_max + 1))


def choose_cutoff(nbar: float, tail_eps: float = 1e-12) -> int:
    """Smallest photon cutoff whose Poisson tail is below ``tail_eps``.

    The result is never less than ``nbar + 6 sqrt(nbar) + 10``.
    """
    _check_finite(nbar=nbar, tail_eps=tail_eps)
    if not 0 < tail_eps <= 1e-6:
        raise ValueError("tail_eps must lie in (0, 1e-6]")
    floor = int(math.ceil(nbar + 6 * math.sqrt(nbar) + 10))
    if nbar == 0:
        return floor
    probe = int(nbar + 40 * math.sqrt(nbar) + 60)
    p = _poisson_amplitudes(nbar, probe) ** 2
    # tail[k] = sum_{n > k} p_n, summed from the small end for accuracy
    tail = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
    n_max = int(np.argmax(tail < tail_eps))
    return max(n_max, floor)


def assemble_initial(atomic: AtomicAmplitudes, params: SystemParams,
                     trunc: FockTruncation) -> JointState:
    """Product of an atomic pure state with the coherent field at ``tau = 0``.

    Under the ``truncate`` policy the three-state low block is discarded and
    its probability recorded; a :class:`TruncationError` is raised when the
    discarded total exceeds ``trunc.tolerance``.
    """
    n_max = trunc.n_max
    q = coherent_weights(params.nbar, params.alpha_phase, n_max + 2)
    a, b, c, d = atomic.as_array()
    blocks = np.empty((n_max + 1, 4), dtype=complex)
    blocks[:, 0] = q[0:n_max + 1] * a
    blocks[:, 1] = q[1:n_max + 2] * b
    blocks[:, 2] = q[1:n_max + 2] * c
    blocks[:, 3] = q[2:n_max + 3] * d
    low = np.zeros(4, dtype=complex)
    low[GG0] = q[0] * d
    low[GG1] = q[1] * d
    low[GE0] = q[0] * c
    low[EG0] = q[0] * b

    p_full = _poisson_amplitudes(params.nbar, n_max + 3 + int(40 * math.sqrt(params.nbar)) + 60) ** 2
    tail = (abs(a) ** 2 * math.fsum(p_full[n_max + 1:])
            + (abs(b) ** 2 + abs(c) ** 2) * math.fsum(p_full[n_max + 2:])
            + abs(d) ** 2 * math.fsum(p_full[n_max + 3:]))

    dropped = 0.0
    if trunc.low_block_policy is LowBlockPolicy.TRUNCATE:
        dropped = float(np.sum(np.abs(low[1:]) ** 2))
        low[1:] = 0.0
        if dropped + tail > trunc.tolerance:
            raise TruncationError(
                f"truncate policy discards probability {dropped + tail:.3e} "
                f"(> {trunc.tolerance:.1e}); increase n_max or use the "
                f"'numeric-exact' low-block policy")
    info = FockTruncation(n_max, trunc.low_block_policy, trunc.tolerance,
                          dropped_mass=dropped, tail_mass=tail)
    return JointState(0.0, blocks, low, info)


def block_norm(state: JointState, n: int | None = None) -> np.ndarray:
    """Squared norm of block ``n`` (or of every block when ``n`` is None)."""
    norms = np.sum(np.abs(state.blocks) ** 2, axis=-1)
    return norms if n is None else norms[..., n]


def total_norm(state: JointState) -> float | np.ndarray:
    return np.sum(block_norm(state), axis=-1) + np.sum(np.abs(state.low) ** 2, axis=-1)
