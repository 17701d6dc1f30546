"""Brute-force propagation of the interaction-picture equations.

Classical fixed-step RK4 on the coupled amplitude equations of each block,
with the explicit ``exp(+-i D tau)`` phases. Nothing here uses the
characteristic roots, so agreement with :mod:`tavis_esd.analytic` is an
independent check of the closed form.

Speed comes from linearity. The right-hand side at ``tau0 + s`` equals the
one at ``s`` conjugated by the diagonal phase matrix
``P(tau) = diag(exp(i D tau), 1, 1, exp(-i D tau))``, so one RK4 step starting
anywhere is ``P(tau0) S_h P(tau0)^+`` with ``S_h`` a single step taken from
zero. In the co-moving variable ``z = P(tau)^+ y`` a run of ``k`` steps is the
matrix power ``(P(h)^+ S_h)^k``, which reproduces the step-by-step result up
to rounding (see :func:`rk4_integrate` for the plain loop).

The low-excitation states ``(|gg,1>, |ge,0>, |eg,0>)`` form a block with
``n = -1``: no ``|ee>`` partner (``alpha = 0``) and ``beta = lambda1``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .analytic import NumericalError
from .model import GE0, GG1, EG0, JointState, SystemParams

__all__ = [
    "IntegratorConfig",
    "AccuracyError",
    "rhs_block",
    "rk4_step",
    "rk4_integrate",
    "integrate_block",
    "integrate_low_block",
    "BlockIntegrator",
    "LowBlockPropagator",
    "OraclePropagator",
]

log = logging.getLogger(__name__)


class AccuracyError(NumericalError):
    """Richardson error estimate stayed above target down to the minimum step."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 settings.

    ``tolerance`` is the accepted Richardson error per unit ``tau``; the step
    is halved until it is met or ``min_step`` is reached.
    """

    step: float = 1e-3
    richardson: bool = True
    tolerance: float = 1e-9
    min_step: float = 1e-6

    def __post_init__(self):
        if not (self.step > 0 and self.min_step > 0 and self.tolerance > 0):
            raise ValueError("step, min_step and tolerance must be positive")


def rhs_block(tau, y, alpha, beta, detuning: float, lambda2: float) -> np.ndarray:
    """Time derivative of ``(A_n, B_{n+1}, C_{n+1}, D_{n+2})``.

    ``y`` has shape ``(..., 4)``; ``alpha`` and ``beta`` broadcast against
    ``y[..., 0]``.
    """
    y = np.asarray(y, dtype=complex)
    ph = np.exp(1j * detuning * tau)
    A, B, C, D = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    K = B + C
    down = alpha * np.conj(ph) * A + beta * ph * D
    return np.stack([
        -1j * alpha * ph * K,
        -1j * (down + lambda2 * C),
        -1j * (down + lambda2 * B),
        -1j * beta * np.conj(ph) * K,
    ], axis=-1)


def rk4_step(f, tau, y, h):
    k1 = f(tau, y)
    k2 = f(tau + h / 2, y + h / 2 * k1)
    k3 = f(tau + h / 2, y + h / 2 * k2)
    k4 = f(tau + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_integrate(init, alpha, beta, detuning, lambda2, tau_end, step):
    """Plain step-by-step RK4 loop (slow; reference for the fast path)."""
    steps = max(1, math.ceil(tau_end / step - 1e-9)) if tau_end > 0 else 0
    y = np.asarray(init, dtype=complex)
    if steps == 0:
        return y.copy()
    h = tau_end / steps
    f = lambda t, v: rhs_block(t, v, alpha, beta, detuning, lambda2)
    for k in range(steps):
        y = rk4_step(f, k * h, y, h)
    return y


def _phase(detuning, tau):
    """Diagonal of ``P(tau)``, shape ``tau.shape + (4,)``."""
    tau = np.asarray(tau, dtype=float)[..., None]
    e = np.exp(1j * detuning * tau)
    one = np.ones_like(e)
    return np.concatenate([e, one, one, np.conj(e)], axis=-1)


class BlockIntegrator:
    """RK4 propagation of independent blocks sharing ``detuning``/``lambda2``.

    Parameters
    ----------
    alpha, beta : array_like
        Per-block couplings, shape ``(nb,)``.
    """

    def __init__(self, alpha, beta, detuning: float, lambda2: float,
                 config: IntegratorConfig | None = None):
        self.alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        self.beta = np.atleast_1d(np.asarray(beta, dtype=float))
        self.detuning = float(detuning)
        self.lambda2 = float(lambda2)
        self.config = config or IntegratorConfig()
        self.error_estimate = 0.0
        self.step_used = self.config.step

    def comoving_step(self, h: float) -> np.ndarray:
        """``P(h)^+ S_h`` for every block, shape ``(nb, 4, 4)``."""
        nb = self.alpha.size
        basis = np.broadcast_to(np.eye(4, dtype=complex), (nb, 4, 4))
        # column j of S is one RK4 step applied to basis vector e_j
        al, be = self.alpha[:, None], self.beta[:, None]
        f = lambda t, v: rhs_block(t, v, al, be, self.detuning, self.lambda2)
        S = np.swapaxes(rk4_step(f, 0.0, basis, h), -1, -2)
        return np.conj(_phase(self.detuning, h))[..., :, None] * S

    def _run(self, y0, taus, step):
        """Samples at sorted ``taus`` (starting from ``y0`` at 0) for target ``step``."""
        z = np.asarray(y0, dtype=complex).copy()
        out = np.empty(taus.shape + z.shape, dtype=complex)
        cache = {}
        prev = 0.0
        for j, t in enumerate(taus):
            width = t - prev
            if width > 0:
                k = max(1, math.ceil(width / step - 1e-9))
                h = width / k
                key = (k, float(f"{h:.13e}"))
                G = cache.get(key)
                if G is None:
                    G = np.linalg.matrix_power(self.comoving_step(h), k)
                    cache[key] = G
                z = np.einsum("nij,nj->ni", G, z)
            out[j] = z
            prev = t
        return out * _phase(self.detuning, taus)[:, None, :]

    def integrate(self, y0, taus) -> np.ndarray:
        """Block amplitudes at each of ``taus``, shape ``taus.shape + (nb, 4)``.

        With Richardson checking enabled the result comes from step ``h/2``
        after comparison with step ``h``; the estimate is stored in
        :attr:`error_estimate`.
        """
        taus = np.asarray(taus, dtype=float)
        flat = np.atleast_1d(taus).ravel()
        if np.any(flat < 0):
            raise ValueError("tau must be >= 0")
        order = np.argsort(flat, kind="stable")
        srt = flat[order]
        y0 = np.asarray(y0, dtype=complex).reshape(self.alpha.size, 4)
        cfg = self.config
        span = max(1.0, float(srt[-1]) if srt.size else 1.0)
        h = cfg.step
        coarse = self._run(y0, srt, h)
        if cfg.richardson:
            while True:
                fine = self._run(y0, srt, h / 2)
                err = float(np.max(np.abs(fine - coarse))) / 15.0 if srt.size else 0.0
                if err <= cfg.tolerance * span:
                    coarse, h = fine, h / 2
                    break
                if h / 2 < cfg.min_step:
                    raise AccuracyError(
                        f"RK4 error estimate {err:.3e} exceeds {cfg.tolerance:.1e} per unit "
                        f"tau over tau <= {span:g} at step {h / 2:.2e}; "
                        f"largest coupling {np.max(self.beta):.3g}")
                coarse, h = fine, h / 2
            self.error_estimate = err
            log.debug("oracle step %.3g, Richardson estimate %.2e", h, err)
        self.step_used = h
        result = np.empty_like(coarse)
        result[order] = coarse
        return result.reshape(taus.shape + (self.alpha.size, 4))


def integrate_block(init, couplings, detuning: float, lambda2: float, tau_end: float,
                    config: IntegratorConfig | None = None) -> np.ndarray:
    """Integrate one block (or a stack of blocks) from 0 to ``tau_end``."""
    if tau_end < 0:
        raise ValueError("tau_end must be >= 0")
    init = np.asarray(init, dtype=complex)
    integ = BlockIntegrator(couplings.alpha, couplings.beta, detuning, lambda2, config)
    y = integ.integrate(init.reshape(-1, 4), np.array([tau_end]))[0]
    return y.reshape(init.shape)


def integrate_low_block(init, detuning: float, lambda2: float, tau_end: float,
                        config: IntegratorConfig | None = None,
                        lambda1: float = 1.0) -> np.ndarray:
    """Integrate ``(|gg,1>, |ge,0>, |eg,0>)`` amplitudes from 0 to ``tau_end``."""
    return LowBlockPropagator(init, SystemParams(lambda2, detuning, lambda1=lambda1),
                              config).evolve(tau_end)


class LowBlockPropagator:
    """Oracle propagation of the three-state block missing from the ansatz."""

    def __init__(self, init, params: SystemParams, config: IntegratorConfig | None = None):
        gg1, ge0, eg0 = np.asarray(init, dtype=complex)
        self._y0 = np.array([[0.0, eg0, ge0, gg1]], dtype=complex)
        self._integ = BlockIntegrator(0.0, params.lambda1, params.detuning, params.lambda2, config)

    def evolve(self, tau) -> np.ndarray:
        y = self._integ.integrate(self._y0, tau)[..., 0, :]
        return np.stack([y[..., 3], y[..., 2], y[..., 1]], axis=-1)


class OraclePropagator:
    """Numeric counterpart of :class:`tavis_esd.analytic.AnalyticPropagator`.

    All blocks and the low block are integrated together; sampling a grid
    costs one pass.
    """

    def __init__(self, initial: JointState, params: SystemParams,
                 config: IntegratorConfig | None = None):
        self.initial = initial
        self.params = params
        nb = initial.blocks.shape[-2]
        k = np.arange(nb + 1, dtype=float)  # k = n + 1; k = 0 is the low block
        self._integ = BlockIntegrator(params.lambda1 * np.sqrt(k), params.lambda1 * np.sqrt(k + 1),
                                      params.detuning, params.lambda2, config)
        low = initial.low
        self._y0 = np.concatenate([[[0.0, low[EG0], low[GE0], low[GG1]]], initial.blocks])

    @property
    def error_estimate(self) -> float:
        return self._integ.error_estimate

    def evolve(self, tau) -> JointState:
        tau_arr = np.asarray(tau, dtype=float)
        y = self._integ.integrate(self._y0, tau_arr)
        low = np.broadcast_to(self.initial.low, tau_arr.shape + (4,)).copy()
        low[..., GG1] = y[..., 0, 3]
        low[..., GE0] = y[..., 0, 2]
        low[..., EG0] = y[..., 0, 1]
        return JointState(tau_arr[()] if tau_arr.ndim == 0 else tau_arr, y[..., 1:, :], low,
                          self.initial.truncation)
