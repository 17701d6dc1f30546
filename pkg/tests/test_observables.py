import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tavis_esd.esd import build_initial, make_propagator
from tavis_esd.model import (FockTruncation, SystemParams, assemble_initial, choose_cutoff,
                             preset_state)
from tavis_esd.observables import (concurrence, concurrence_margin, entanglement_of_formation,
                                   population_inversion, reduced_density, reduced_density_direct,
                                   single_atom_density, spin_flip)

S2 = 1 / math.sqrt(2)


def pure(v):
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def test_spin_flip_examples():
    # |ee><ee| flips to |gg><gg|; Bell states are fixed points
    ee = pure([1, 0, 0, 0])
    np.testing.assert_allclose(spin_flip(ee), pure([0, 0, 0, 1]), atol=1e-15)
    for b in ([S2, 0, 0, S2], [0, S2, S2, 0]):
        np.testing.assert_allclose(spin_flip(pure(b)), pure(b), atol=1e-15)


@pytest.mark.parametrize("v", [[S2, 0, 0, S2], [S2, 0, 0, -S2], [0, S2, S2, 0], [0, S2, -1j * S2, 0]])
def test_bell_states_maximal(v):
    ev = concurrence(pure(v))
    assert abs(ev.concurrence - 1) < 1e-12
    assert abs(ev.eof - 1) < 1e-12


def test_product_states_zero():
    for v in ([1, 0, 0, 0], [0.5, 0.5, 0.5, 0.5], [0, 0, 0, 1]):
        assert concurrence(pure(v)).concurrence == 0


def test_w_like_two_thirds():
    ev = concurrence(pure([0, 1, 1, 1]))
    assert abs(ev.concurrence - 2 / 3) < 1e-12
    # mpmath, 50 digits
    assert abs(ev.eof - 0.55004775958275744118) < 1e-12


cplx = st.tuples(st.floats(-1, 1), st.floats(-1, 1)).map(lambda t: complex(*t))


@settings(max_examples=200, deadline=None)
@given(st.lists(cplx, min_size=4, max_size=4))
def test_pure_state_closed_form(v):
    v = np.asarray(v)
    nrm = np.linalg.norm(v)
    if nrm < 1e-3:
        return
    v = v / nrm
    expected = 2 * abs(v[0] * v[3] - v[1] * v[2])
    assert abs(concurrence(pure(v)).concurrence - expected) < 1e-7


def test_hermitian_and_direct_routes_agree():
    rng = np.random.default_rng(3)
    for _ in range(200):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = g @ g.conj().T
        rho /= np.trace(rho).real
        a = concurrence_margin(rho, hermitian=True)
        b = concurrence_margin(rho, hermitian=False)
        if a > 1e-6 or b > 1e-6:
            assert abs(a - b) < 1e-9


@pytest.mark.parametrize("p", [0.0, 0.2, 1 / 3, 0.5, 0.9, 1.0])
def test_werner(p):
    rho = p * pure([0, S2, -S2, 0]) + (1 - p) * np.eye(4) / 4
    assert abs(concurrence(rho).concurrence - max(0, (3 * p - 1) / 2)) < 1e-10


def test_trace_must_be_one():
    with pytest.raises(ValueError, match="renormalize"):
        concurrence(0.9 * pure([S2, 0, 0, S2]))


def test_batched_shape():
    rho = np.stack([pure([S2, 0, 0, S2]), np.eye(4) / 4])
    ev = concurrence(rho)
    assert ev.concurrence.shape == (2,)
    np.testing.assert_allclose(ev.concurrence, [1, 0], atol=1e-12)


def test_eof_values():
    assert entanglement_of_formation(0.0) == 0
    assert abs(entanglement_of_formation(1.0) - 1) < 1e-15
    c = np.linspace(0, 1, 501)
    e = entanglement_of_formation(c)
    assert np.all(np.diff(e) > 0)
    assert np.all(e <= c + 1e-15)
    # small-c behaviour: no cancellation, stays positive
    assert 0 < entanglement_of_formation(1e-9) < 1e-15
    with pytest.raises(ValueError):
        entanglement_of_formation(1.1)


def _state(name, nbar, lambda2=0.0, detuning=0.0, n_max=None):
    p = SystemParams(lambda2=lambda2, detuning=detuning, nbar=nbar)
    return p, assemble_initial(preset_state(name), p, FockTruncation(n_max or choose_cutoff(nbar)))


@pytest.mark.parametrize("name", ["bell_correlated", "w_like", "uniform_L", "excited_excited"])
def test_reduced_density_matches_partial_trace(name):
    p, s0 = _state(name, 4.0, 2.0, 1.0)
    s = make_propagator(s0, p).evolve(np.array([0.0, 0.7, 3.3, 11.0]))
    a = reduced_density(s)
    b = reduced_density_direct(s)
    np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(a, np.conj(np.swapaxes(a, -1, -2)), atol=1e-15)
    assert np.min(np.linalg.eigvalsh(a)) > -1e-12


def test_initial_coherence_bell_correlated():
    _, s = _state("bell_correlated", 100.0)
    rho = reduced_density(s)
    # the partial trace pairs equal photon numbers, so the coherence is half
    # the retained Poisson mass
    assert abs(rho[0, 3] - 0.5) < 1e-12
    assert concurrence(rho).concurrence > 1 - 1e-9
    assert abs(rho[0, 0] - 0.5) < 1e-12 and abs(rho[3, 3] - 0.5) < 1e-12


def test_excited_excited_initial():
    _, s = _state("excited_excited", 20.0)
    rho = reduced_density(s)
    np.testing.assert_allclose(rho, np.diag([1, 0, 0, 0]), atol=1e-12)
    assert abs(population_inversion(s) - 1) < 1e-12
    assert concurrence(rho).concurrence == 0


def test_single_atom_and_inversion():
    p, s0 = _state("w_like", 3.0, 1.0, 0.5)
    s = make_propagator(s0, p).evolve(np.linspace(0, 5, 6))
    r1 = single_atom_density(s)
    np.testing.assert_allclose(np.real(r1[:, 0, 0] - r1[:, 1, 1]), population_inversion(s), atol=1e-12)
    np.testing.assert_allclose(np.trace(r1, axis1=1, axis2=2), 1, atol=1e-12)
    _, s = _state("w_like", 0.0)
    assert abs(population_inversion(s) - (-1 / 3)) < 1e-15


def test_local_phase_invariance():
    # a local diagonal unitary on each atom leaves the concurrence unchanged
    p, s0 = _state("uniform_L", 5.0, 1.0, 2.0)
    rho = reduced_density(make_propagator(s0, p).evolve(np.array([2.5])))[0]
    u1 = np.diag(np.exp(1j * np.array([0.3, -0.3])))
    u2 = np.diag(np.exp(1j * np.array([-1.1, 1.1])))
    u = np.kron(u1, u2)
    c0 = concurrence(rho).concurrence
    c1 = concurrence(u @ rho @ u.conj().T).concurrence
    assert abs(c0 - c1) < 1e-10


# (tau, C, E_f, sigma_z) from an independent full Hilbert-space propagation
# (sparse expm_multiply, field cut at nbar + 14 sqrt(nbar) + 40)
FROZEN = {
    ("bell_correlated", 0.0, 0.0, 100.0): [
        (1.0, 0.1360434792493, 0.0427125841377909, -0.05572180873229554),
        (10.0, 0.0, 0.0, -0.002493818035045725),
        (31.4, 0.5379228473197606, 0.3968821946479234, -0.0020869927545795752)],
    ("w_like", 2.0, 1.0, 5.0): [
        (3.7, 0.07152300837260134, 0.014150850321575186, 0.12782631577718218),
        (12.0, 0.05630263528388818, 0.009313108844124963, 0.0428136755014728)],
    ("uniform_L", 0.2, 0.0, 100.0): [
        (15.0, 0.0037626942984534534, 6.919938847471885e-05, -0.002490626869844026)],
    ("excited_excited", 5.0, 5.0, 20.0): [
        (7.5, 0.4397231840039904, 0.2903484943316289, 0.27504445290664553)],
    ("bell_anticorrelated", 0.0, 0.0, 100.0): [
        (12.0, 6.350239853208928e-06, 3.828125180178828e-10, -0.002512692359387614),
        (23.83251953125, 0.0, 0.0, -0.002512771248467466)],
    ("bell_anticorrelated", 3.0, 2.0, 50.0): [
        (4.2, 0.0, 0.0, -0.01601108911549734)],
}


@pytest.mark.parametrize("key", list(FROZEN), ids=lambda k: f"{k[0]}-{k[1]}-{k[2]}-{k[3]}")
@pytest.mark.parametrize("engine", ["analytic", "oracle"])
def test_against_full_space_reference(key, engine):
    name, l2, det, nbar = key
    p = SystemParams(lambda2=l2, detuning=det, nbar=nbar)
    s0 = build_initial(p, preset_state(name))
    rows = FROZEN[key]
    s = make_propagator(s0, p, engine).evolve(np.array([r[0] for r in rows]))
    rho = reduced_density(s)
    tr = np.real(np.trace(rho, axis1=1, axis2=2))
    ev = concurrence(rho / tr[:, None, None])
    sz = population_inversion(s) / tr
    for k, (_, c, e, z) in enumerate(rows):
        assert abs(ev.concurrence[k] - c) < 1e-8
        assert abs(ev.eof[k] - e) < 1e-8
        assert abs(sz[k] - z) < 1e-8
