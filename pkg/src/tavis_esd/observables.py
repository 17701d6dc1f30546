"""Atomic reduced states, concurrence, entanglement of formation, inversion.

Two-atom matrices use the basis order ``(ee, eg, ge, gg)``; single-atom
matrices use ``(e, g)``. Every function accepts a :class:`JointState` with
or without a leading time axis and returns arrays with the same leading
shape.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EG0, GE0, GG0, GG1, JointState

__all__ = [
    "EntanglementValues",
    "reduced_density",
    "reduced_density_direct",
    "spin_flip",
    "concurrence",
    "concurrence_margin",
    "entanglement_of_formation",
    "single_atom_density",
    "population_inversion",
]

CLIP = 1e-10
# margins this small are singular-value round-off for unit-trace input
MARGIN_FLOOR = 1e-14

_SYSY = np.fliplr(np.diag([-1.0, 1.0, 1.0, -1.0]))  # sigma_y (x) sigma_y


@dataclass(frozen=True)
class EntanglementValues:
    concurrence: np.ndarray
    eof: np.ndarray
    eps: np.ndarray

    @property
    def margin(self):
        """``eps1 - eps2 - eps3 - eps4`` before clamping at zero."""
        return _margin(self.eps)


def _margin(eps):
    m = eps[..., 0] - np.sum(eps[..., 1:], axis=-1)
    return np.where((m > 0) & (m <= MARGIN_FLOOR), 0.0, m)


def _conj_pair_sum(x, y):
    return np.sum(x * np.conj(y), axis=-1)


def reduced_density(state: JointState) -> np.ndarray:
    """Two-atom density matrix, field traced out, built from block sums.

    Entries pair amplitudes with equal photon number; each block sum is
    written with the index shifts of the block labels. The three-state and
    vacuum pieces outside the blocks are added by the same rule.
    """
    bl, low = state.blocks, state.low
    A, B, C, D = (bl[..., k] for k in range(4))
    gg0, gg1, ge0, eg0 = (low[..., k] for k in (GG0, GG1, GE0, EG0))

    rho = np.zeros(bl.shape[:-2] + (4, 4), dtype=complex)
    rho[..., 0, 0] = np.sum(np.abs(A) ** 2, axis=-1)
    rho[..., 1, 1] = np.sum(np.abs(B) ** 2, axis=-1) + np.abs(eg0) ** 2
    rho[..., 2, 2] = np.sum(np.abs(C) ** 2, axis=-1) + np.abs(ge0) ** 2
    rho[..., 3, 3] = np.sum(np.abs(D) ** 2, axis=-1) + np.abs(gg0) ** 2 + np.abs(gg1) ** 2
    # A_{n+1} B*_{n+1}: A from block n+1, B from block n
    rho[..., 0, 1] = _conj_pair_sum(A[..., 1:], B[..., :-1]) + A[..., 0] * np.conj(eg0)
    rho[..., 0, 2] = _conj_pair_sum(A[..., 1:], C[..., :-1]) + A[..., 0] * np.conj(ge0)
    rho[..., 0, 3] = (_conj_pair_sum(A[..., 2:], D[..., :-2])
                      + A[..., 0] * np.conj(gg0) + A[..., 1] * np.conj(gg1))
    rho[..., 1, 2] = _conj_pair_sum(B, C) + eg0 * np.conj(ge0)
    rho[..., 1, 3] = (_conj_pair_sum(B[..., 1:], D[..., :-1])
                      + eg0 * np.conj(gg0) + B[..., 0] * np.conj(gg1))
    rho[..., 2, 3] = (_conj_pair_sum(C[..., 1:], D[..., :-1])
                      + ge0 * np.conj(gg0) + C[..., 0] * np.conj(gg1))
    iu = np.triu_indices(4, 1)
    rho[..., iu[1], iu[0]] = np.conj(rho[..., iu[0], iu[1]])
    return rho


def reduced_density_direct(state: JointState) -> np.ndarray:
    """Generic partial trace over the photon index of the flat amplitude table."""
    psi = state.photon_table()
    return np.einsum("...il,...jl->...ij", psi, np.conj(psi))


def spin_flip(rho) -> np.ndarray:
    """``(sigma_y x sigma_y) rho* (sigma_y x sigma_y)``."""
    return _SYSY @ np.conj(rho) @ _SYSY


def _psd_factor(rho):
    """``F`` with ``rho = F F^dagger``; negative round-off eigenvalues dropped."""
    w, v = np.linalg.eigh(rho)
    return v * np.sqrt(np.clip(w, 0.0, None))[..., None, :]


def _check_trace(rho):
    tr = np.real(np.trace(rho, axis1=-2, axis2=-1))
    if np.any(np.abs(tr - 1.0) > 1e-6):
        raise ValueError(f"density matrix trace {np.max(np.abs(tr - 1.0)):.2e} away "
                         "from 1; renormalize before computing concurrence")


def _sorted_sqrt(eigs):
    eigs = np.where((eigs < 0) & (eigs > -CLIP), 0.0, eigs)
    eps = np.sqrt(np.clip(eigs, 0.0, None))
    return -np.sort(-eps, axis=-1)


def wootters_eps(rho, hermitian: bool = True) -> np.ndarray:
    """Decreasing square roots of the eigenvalues of ``rho rho~``.

    The default takes them as singular values of ``F^T (sy x sy) F`` where
    ``rho = F F^dagger``, i.e. square roots of the spectrum of the Hermitian
    ``sqrt(rho) rho~ sqrt(rho)``. Working with the factor keeps near-null
    directions of ``rho`` from leaking sqrt-sized round-off into the small
    eps values. ``hermitian=False`` diagonalizes ``rho rho~`` directly.
    """
    rho = np.asarray(rho, dtype=complex)
    if hermitian:
        f = _psd_factor(rho)
        m = np.swapaxes(f, -1, -2) @ _SYSY @ f
        return np.linalg.svd(m, compute_uv=False)
    eigs = np.real(np.linalg.eigvals(rho @ spin_flip(rho)))
    return _sorted_sqrt(eigs)


def concurrence_margin(rho, hermitian: bool = True) -> np.ndarray:
    """``eps1 - eps2 - eps3 - eps4``; concurrence is its positive part."""
    _check_trace(rho)
    return _margin(wootters_eps(rho, hermitian))


def entanglement_of_formation(c) -> np.ndarray:
    """Entanglement of formation of a two-qubit state with concurrence ``c``."""
    c = np.asarray(c, dtype=float)
    if np.any((c < -1e-9) | (c > 1 + 1e-9)):
        raise ValueError("concurrence must lie in [0, 1]")
    c = np.clip(c, 0.0, 1.0)
    x = 0.5 * (1.0 + np.sqrt(1.0 - c * c))
    # 1 - x written without cancellation for small c
    y = 0.5 * c * c / (1.0 + np.sqrt(1.0 - c * c))
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - np.where(y > 0, y * np.log2(y), 0.0)
    h = np.where(c == 0, 0.0, h)
    return h[()] if h.ndim == 0 else h


def concurrence(rho, hermitian: bool = True) -> EntanglementValues:
    """Wootters concurrence and derived entanglement of formation.

    ``rho`` must have unit trace (within 1e-6).
    """
    _check_trace(rho)
    eps = wootters_eps(rho, hermitian)
    c = np.clip(_margin(eps), 0.0, 1.0)
    return EntanglementValues(c, entanglement_of_formation(c), eps)


def single_atom_density(state: JointState) -> np.ndarray:
    """Reduced state of the first atom."""
    rho = reduced_density(state)
    r1 = np.empty(rho.shape[:-2] + (2, 2), dtype=complex)
    r1[..., 0, 0] = rho[..., 0, 0] + rho[..., 1, 1]
    r1[..., 1, 1] = rho[..., 2, 2] + rho[..., 3, 3]
    r1[..., 0, 1] = rho[..., 0, 2] + rho[..., 1, 3]
    r1[..., 1, 0] = np.conj(r1[..., 0, 1])
    return r1


def population_inversion(state: JointState) -> np.ndarray:
    """``<sigma_z>`` of the first atom (unnormalized by any discarded mass)."""
    bl, low = state.blocks, state.low
    p = np.abs(bl) ** 2
    inv = np.sum(p[..., 0] + p[..., 1] - p[..., 2] - p[..., 3], axis=-1)
    inv = inv + np.abs(low[..., EG0]) ** 2 - np.abs(low[..., GE0]) ** 2 \
        - np.abs(low[..., GG0]) ** 2 - np.abs(low[..., GG1]) ** 2
    return inv
