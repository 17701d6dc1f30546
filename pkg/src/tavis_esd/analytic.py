"""Closed-form propagation of every excitation block.

Inside block ``n`` the sum ``K = B_{n+1} + C_{n+1}`` obeys a third-order
linear ODE with constant coefficients,

    K''' + i l2 K'' + [2(a^2 + b^2) + D^2] K' - i[2D(a^2 - b^2) - l2 D^2] K = 0,

with ``a = sqrt(n+1)``, ``b = sqrt(n+2)`` (times lambda1), ``l2`` the
atom-atom coupling and ``D`` the detuning. Writing ``K = sum_j delta_j
exp(m_j tau)`` turns every amplitude into a short sum of exponentials.

The exponents ``m_j`` are found through ``m = i s``, which maps the complex
characteristic polynomial onto a real cubic whose three roots are real
because the block generator is Hermitian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import JointState, LowBlockPolicy, SystemParams

__all__ = [
    "BlockCouplings",
    "BlockSpectrum",
    "NumericalError",
    "DegenerateSpectrumError",
    "characteristic_roots",
    "mu_eta",
    "delta_coefficients",
    "safe_phase_integral",
    "evolve_block",
    "block_spectrum",
    "evolve_state",
    "AnalyticPropagator",
]

SERIES_RADIUS = 1e-6
DEGENERACY_GAP = 1e-6


class NumericalError(ArithmeticError):
    """A numerical accuracy guarantee could not be met."""


class DegenerateSpectrumError(NumericalError):
    """Characteristic roots too close for the closed form; use the oracle."""


@dataclass(frozen=True)
class BlockCouplings:
    """Field couplings ``alpha = lambda1 sqrt(n+1)``, ``beta = lambda1 sqrt(n+2)``.

    Fields may be scalars or equal-length arrays (one entry per block).
    """

    n: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @classmethod
    def for_blocks(cls, n, lambda1: float = 1.0) -> "BlockCouplings":
        n = np.asarray(n)
        if np.any(n < 0):
            raise ValueError("block index must be >= 0")
        return cls(n, lambda1 * np.sqrt(n + 1.0), lambda1 * np.sqrt(n + 2.0))


@dataclass(frozen=True)
class BlockSpectrum:
    """Exponents and mode weights of ``K(tau)`` for each block.

    ``m`` and ``delta`` have shape ``(..., 3)``; ``mu`` and ``eta`` are the
    depressed-cubic coefficients, kept for diagnostics.
    """

    couplings: BlockCouplings
    detuning: float
    lambda2: float
    m: np.ndarray
    delta: np.ndarray
    mu: np.ndarray
    eta: np.ndarray

    @property
    def m1(self):
        return self.m[..., 0]

    @property
    def m2(self):
        return self.m[..., 1]

    @property
    def m3(self):
        return self.m[..., 2]

    @property
    def delta1(self):
        return self.delta[..., 0]

    @property
    def delta2(self):
        return self.delta[..., 1]

    @property
    def delta3(self):
        return self.delta[..., 2]


def _poly_coefficients(alpha, beta, detuning, lambda2):
    """Coefficients of the real cubic ``s^3 + c2 s^2 + c1 s + c0``."""
    a2, b2 = np.square(alpha), np.square(beta)
    c2 = np.full(np.shape(a2), float(lambda2))
    c1 = -(2.0 * (a2 + b2) + detuning ** 2)
    c0 = 2.0 * detuning * (a2 - b2) - lambda2 * detuning ** 2
    return c2, c1, c0


def _real_cubic_roots(c2, c1, c0):
    """Three real roots of monic cubics, ascending, by the trigonometric method.

    Two Newton steps polish each root; the trigonometric formula alone loses
    relative accuracy on roots much smaller than the others.
    """
    c2, c1, c0 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (c2, c1, c0)))
    shift = c2 / 3.0
    p = c1 - c2 * shift
    q = 2.0 * shift ** 3 - c1 * shift + c0
    if np.any(p > 0):
        raise NumericalError("cubic does not have three real roots")
    amp = 2.0 * np.sqrt(-p / 3.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(p < 0, 3.0 * q / (p * amp), 0.0)
    theta = np.arccos(np.clip(arg, -1.0, 1.0)) / 3.0
    k = np.arange(3)
    t = amp[..., None] * np.cos(theta[..., None] - 2.0 * np.pi * k / 3.0)
    s = t - shift[..., None]
    cc2, cc1, cc0 = c2[..., None], c1[..., None], c0[..., None]
    for _ in range(2):
        f = ((s + cc2) * s + cc1) * s + cc0
        df = (3.0 * s + 2.0 * cc2) * s + cc1
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(df != 0, f / df, 0.0)
        s = s - step
    return np.sort(s, axis=-1)


def characteristic_roots(couplings: BlockCouplings, detuning: float, lambda2: float) -> np.ndarray:
    """Exponents ``m_1, m_2, m_3`` of ``K(tau)``, shape ``(..., 3)``.

    Roots are purely imaginary and sorted by ascending imaginary part.

    Raises
    ------
    NumericalError
        If any root fails the polynomial residual check.
    """
    if not all(np.isfinite(x) for x in (detuning, lambda2)):
        raise ValueError("detuning and lambda2 must be finite")
    c2, c1, c0 = _poly_coefficients(couplings.alpha, couplings.beta, detuning, lambda2)
    s = _real_cubic_roots(c2, c1, c0)
    m = 1j * s
    a2b2 = np.square(couplings.alpha) + np.square(couplings.beta)
    p_m = ((m + 1j * lambda2) * m + (2 * a2b2 + detuning ** 2)[..., None]) * m \
        - 1j * c0[..., None]
    scale = np.maximum.reduce([np.ones_like(c1), abs(c2), abs(c1), abs(c0)])
    if np.any(abs(p_m) >= 1e-9 * scale[..., None]):
        raise NumericalError("characteristic root residual above tolerance")
    return m


def mu_eta(couplings: BlockCouplings, detuning: float, lambda2: float):
    """Coefficients of the depressed cubic ``w^3 + eta w + mu = 0``, ``w = m + i l2/3``."""
    a2, b2 = np.square(couplings.alpha), np.square(couplings.beta)
    mu = -1j / 27.0 * (2 * lambda2 ** 3 + 18 * lambda2 * (a2 + b2 - detuning ** 2)
                       + 54 * detuning * (a2 - b2))
    eta = (6 * (a2 + b2) + 3 * detuning ** 2 + lambda2 ** 2) / 3.0
    return mu, eta


def _initial_derivatives(init, couplings, detuning, lambda2):
    """``K(0), K'(0), K''(0)`` implied by the block equations of motion."""
    A0, B0, C0, D0 = (init[..., i] for i in range(4))
    al, be = couplings.alpha, couplings.beta
    K0 = B0 + C0
    K1 = -1j * (2 * al * A0 + 2 * be * D0 + lambda2 * K0)
    K2 = (-2 * al * detuning * A0 + 2 * be * detuning * D0
          - 2 * (al ** 2 + be ** 2) * K0 - 1j * lambda2 * K1)
    return K0, K1, K2


def delta_coefficients(init, roots, couplings: BlockCouplings, detuning: float,
                       lambda2: float) -> np.ndarray:
    """Mode weights ``delta_j`` with ``K(tau) = sum_j delta_j exp(m_j tau)``.

    ``init`` is ``(..., 4)`` holding ``(A_n, B_{n+1}, C_{n+1}, D_{n+2})`` at
    ``tau = 0``. Well separated roots use the explicit formulas; near
    degenerate ones fall back to the Vandermonde system in ``K, K', K''``.
    """
    init = np.asarray(init, dtype=complex)
    m = np.asarray(roots, dtype=complex)
    if m.ndim == 1 and init.ndim == 1:
        return delta_coefficients(init[None], m[None], couplings, detuning, lambda2)[0]
    m1, m2, m3 = m[..., 0], m[..., 1], m[..., 2]
    al, be = couplings.alpha, couplings.beta
    A0, D0 = init[..., 0], init[..., 3]
    K0 = init[..., 1] + init[..., 2]
    r2 = 2 * (al ** 2 + be ** 2) + lambda2 ** 2

    def weight(mi, mk, denom):
        s = 1j * (mi + mk)
        return (2 * al * A0 * (s - lambda2 - detuning)
                + 2 * be * D0 * (s - lambda2 + detuning)
                + (s * (lambda2 - 1j * m1) - r2 - m1 ** 2) * K0) / denom

    diff = np.abs(m[..., :, None] - m[..., None, :])
    gap = np.min(np.where(np.eye(3, dtype=bool), np.inf, diff), axis=(-2, -1))
    near = gap <= DEGENERACY_GAP * np.maximum(1.0, np.max(np.abs(m), axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        d2 = weight(m1, m3, (m1 - m2) * (m3 - m2))
        d3 = weight(m1, m2, (m1 - m3) * (m2 - m3))
    d1 = K0 - (d2 + d3)
    delta = np.stack(np.broadcast_arrays(d1, d2, d3), axis=-1)

    if np.any(near):
        K = np.stack(np.broadcast_arrays(*_initial_derivatives(init, couplings, detuning, lambda2)), axis=-1)
        V = np.stack([np.ones_like(m), m, m * m], axis=-2)
        idx = np.nonzero(np.broadcast_to(near, delta.shape[:-1]))
        Vn = np.broadcast_to(V, delta.shape[:-1] + (3, 3))[idx]
        col = np.max(np.abs(Vn), axis=-2, keepdims=True)
        col[col == 0] = 1.0
        Vs = Vn / col
        if np.any(np.linalg.cond(Vs) > 1e12):
            raise DegenerateSpectrumError(
                "coincident characteristic roots; propagate with the numeric oracle")
        sol = np.linalg.solve(Vs, np.broadcast_to(K, delta.shape)[idx][..., None])[..., 0]
        delta[idx] = sol / col[..., 0, :]
    return delta


def safe_phase_integral(z, tau, shift=0.0):
    """``(exp(z tau) - 1) / z`` with the removable singularity at ``z = 0``.

    ``z`` is ``m + shift``. A Taylor series is used for ``|z| < 1e-6``,
    ``expm1`` otherwise.
    """
    z, tau = np.broadcast_arrays(np.asarray(z, dtype=complex) + shift,
                                 np.asarray(tau, dtype=float))
    shape = z.shape
    z, tau = z.ravel(), tau.ravel()
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.expm1(z * tau) / z
    small = np.abs(z) < SERIES_RADIUS
    if np.any(small):
        # tau * sum_k x^k / (k+1)!, x = z tau
        x = z[small] * tau[small]
        acc = np.zeros(x.shape, dtype=complex)
        term = np.ones(x.shape, dtype=complex)
        for k in range(1, 14):
            acc += term
            term = term * x / (k + 1)
        out[small] = tau[small] * acc
    return out.reshape(shape)[()]


def evolve_block(spectrum: BlockSpectrum, init, tau) -> np.ndarray:
    """Block amplitudes at time(s) ``tau``.

    ``init`` has shape ``(nb, 4)`` (or ``(4,)`` for one block). With a 1-d
    ``tau`` the result gains a leading time axis.
    """
    init = np.asarray(init, dtype=complex)
    tau = np.asarray(tau, dtype=float)
    m, delta = spectrum.m, spectrum.delta
    al = np.asarray(spectrum.couplings.alpha)[..., None]
    be = np.asarray(spectrum.couplings.beta)[..., None]
    t = tau.reshape(tau.shape + (1,) * m.ndim)
    dD = 1j * spectrum.detuning

    K = np.sum(delta * np.exp(m * t), axis=-1)
    A = init[..., 0] - 1j * np.sum(al * delta * safe_phase_integral(m + dD, t), axis=-1)
    D = init[..., 3] - 1j * np.sum(be * delta * safe_phase_integral(m - dD, t), axis=-1)
    anti = (init[..., 1] - init[..., 2]) * np.exp(1j * spectrum.lambda2 * tau.reshape(tau.shape + (1,) * (m.ndim - 1)))
    B = 0.5 * (anti + K)
    C = 0.5 * (-anti + K)
    return np.stack([A, B, C, D], axis=-1)


def block_spectrum(couplings: BlockCouplings, detuning: float, lambda2: float,
                   init) -> BlockSpectrum:
    m = _cached_roots(couplings, detuning, lambda2)
    mu, eta = mu_eta(couplings, detuning, lambda2)
    delta = delta_coefficients(init, m, couplings, detuning, lambda2)
    return BlockSpectrum(couplings, detuning, lambda2, m, delta, mu, eta)


@lru_cache(maxsize=64)
def _roots_for(n_max: int, lambda1: float, detuning: float, lambda2: float) -> np.ndarray:
    m = characteristic_roots(BlockCouplings.for_blocks(np.arange(n_max + 1), lambda1),
                             detuning, lambda2)
    m.setflags(write=False)
    return m


def _cached_roots(couplings, detuning, lambda2):
    n = np.asarray(couplings.n)
    if n.ndim == 1 and n.size and np.array_equal(n, np.arange(n.size)):
        lambda1 = float(couplings.alpha[0])
        return _roots_for(n.size - 1, lambda1, float(detuning), float(lambda2))
    return characteristic_roots(couplings, detuning, lambda2)


class AnalyticPropagator:
    """Closed-form propagator for one initial state and parameter set.

    Block spectra are built once; each call to :meth:`evolve` costs
    ``O(blocks)`` per time sample. The three-state low block is handed to the
    numeric oracle, which is exact to its accuracy target.
    """

    def __init__(self, initial: JointState, params: SystemParams, oracle_config=None):
        from .oracle import IntegratorConfig, LowBlockPropagator

        self.initial = initial
        self.params = params
        nb = initial.blocks.shape[-2]
        self.couplings = BlockCouplings.for_blocks(np.arange(nb), params.lambda1)
        self.spectrum = block_spectrum(self.couplings, params.detuning, params.lambda2,
                                       initial.blocks)
        self._low = None
        if (initial.truncation.low_block_policy is LowBlockPolicy.NUMERIC_EXACT
                and np.any(initial.low[1:] != 0)):
            self._low = LowBlockPropagator(initial.low[1:], params,
                                           oracle_config or IntegratorConfig())

    def evolve(self, tau) -> JointState:
        tau_arr = np.asarray(tau, dtype=float)
        if np.any(tau_arr < 0):
            raise ValueError("tau must be >= 0")
        blocks = evolve_block(self.spectrum, self.initial.blocks, tau_arr)
        low = np.broadcast_to(self.initial.low, tau_arr.shape + (4,)).copy()
        if self._low is not None:
            low[..., 1:] = self._low.evolve(tau_arr)
        return JointState(tau_arr[()] if tau_arr.ndim == 0 else tau_arr, blocks, low,
                          self.initial.truncation)


def evolve_state(initial: JointState, tau, params: SystemParams) -> JointState:
    """Propagate ``initial`` (given at ``tau = 0``) to time(s) ``tau``."""
    return AnalyticPropagator(initial, params).evolve(tau)
