import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from tavis_esd.analytic import (AnalyticPropagator, BlockCouplings, DegenerateSpectrumError,
                                block_spectrum, characteristic_roots, delta_coefficients,
                                evolve_block, evolve_state, mu_eta, safe_phase_integral)
from tavis_esd.model import (FockTruncation, SystemParams, assemble_initial, block_norm,
                             choose_cutoff, coherent_weights, preset_state, total_norm)
from tavis_esd.oracle import IntegratorConfig, integrate_block, rhs_block


def one(n):
    return BlockCouplings.for_blocks(n)


def cubic(m, c, detuning, lambda2):
    a2, b2 = c.alpha ** 2, c.beta ** 2
    return (m ** 3 + 1j * lambda2 * m ** 2 + (2 * (a2 + b2) + detuning ** 2) * m
            - 1j * (2 * detuning * (a2 - b2) - lambda2 * detuning ** 2))


def test_roots_trivial_block():
    m = characteristic_roots(one(0), 0.0, 0.0)
    np.testing.assert_allclose(m, [-1j * math.sqrt(6), 0, 1j * math.sqrt(6)], atol=1e-14)


def test_roots_sum_zero_without_exchange():
    c = BlockCouplings.for_blocks(np.arange(50))
    for d in (-3.0, 0.5, 7.0):
        m = characteristic_roots(c, d, 0.0)
        assert np.max(np.abs(m.sum(axis=-1))) < 1e-9


def test_roots_against_reference_solver():
    # s^3 + 5 s^2 - 10 s - 24 for n=0, lambda2=5, detuning=2 (50-digit polyroots)
    ref = [-6.0, -1.5615528128088302749, 2.5615528128088302749]
    m = characteristic_roots(one(0), 2.0, 5.0)
    np.testing.assert_allclose(m.imag, ref, atol=1e-10)
    np.testing.assert_allclose(sorted(np.roots([1, 5j, 10, 24j]), key=lambda z: z.imag), m,
                               atol=1e-10)


def test_roots_sorted_and_residual():
    c = BlockCouplings.for_blocks(np.arange(0, 300, 7))
    m = characteristic_roots(c, -1.3, 4.2)
    assert np.all(np.diff(m.imag, axis=-1) > 0)
    res = np.abs(cubic(m, BlockCouplings(c.n[:, None], c.alpha[:, None], c.beta[:, None]),
                       -1.3, 4.2))
    assert np.max(res / np.max(np.abs(m), axis=-1, keepdims=True) ** 3) < 1e-12


def test_mu_eta_values():
    mu, eta = mu_eta(one(0), 0.0, 0.0)
    assert mu == 0 and eta == pytest.approx(6.0)
    c = one(7)
    mu, eta = mu_eta(c, 0.0, 0.0)
    assert eta == pytest.approx(2 * (c.alpha ** 2 + c.beta ** 2))
    # exact rationals at n=0, lambda2=5, detuning=2
    mu, eta = mu_eta(one(0), 2.0, 5.0)
    assert abs(mu - (-52j / 27)) < 1e-14
    assert abs(eta - 55 / 3) < 1e-14


def test_depressed_cubic_identity():
    rng = np.random.default_rng(3)
    for _ in range(200):
        c = one(int(rng.integers(0, 400)))
        d, l2 = rng.uniform(-10, 10, 2)
        m = characteristic_roots(c, d, l2)
        mu, eta = mu_eta(c, d, l2)
        w = m + 1j * l2 / 3
        scale = max(1.0, abs(eta) ** 1.5, abs(mu))
        assert np.max(np.abs(w ** 3 + eta * w + mu)) / scale < 1e-8


def _cardano_sets(mu, eta, l2):
    disc = cmath.sqrt(mu * mu / 4 + eta ** 3 / 27)
    u1, u2 = -mu / 2 + disc, -mu / 2 - disc
    w3 = [cmath.exp(2j * math.pi * k / 3) for k in range(3)]
    r1 = [cmath.exp(cmath.log(u1) / 3) * w for w in w3] if u1 != 0 else [0j]
    r2 = [cmath.exp(cmath.log(u2) / 3) * w for w in w3] if u2 != 0 else [0j]
    for v1, v2 in itertools.product(r1, r2):
        s = v1 + v2
        a = 1j * math.sqrt(3) / 2 * (v1 - v2)
        yield sorted([s - 1j * l2 / 3, -s / 2 + a - 1j * l2 / 3, -s / 2 - a - 1j * l2 / 3],
                     key=lambda z: (z.imag, z.real))


def test_cube_root_construction_cross_check():
    """Some (v1, v2) branch pair reproduces the trigonometric roots."""
    rng = np.random.default_rng(11)
    for _ in range(100):
        c = one(int(rng.integers(0, 200)))
        d, l2 = rng.uniform(-10, 10, 2)
        m = characteristic_roots(c, d, l2)
        mu, eta = mu_eta(c, d, l2)
        scale = max(1.0, np.max(np.abs(m)))
        ok = [cand for cand in _cardano_sets(complex(mu), float(eta), l2)
              if np.max(np.abs(np.array(cand) - m)) < 1e-8 * scale]
        assert ok


def test_vieta_random():
    rng = np.random.default_rng(0)
    n = rng.integers(0, 501, 2000)
    c = BlockCouplings.for_blocks(n)
    for d, l2 in rng.uniform(-10, 10, (20, 2)):
        m = characteristic_roots(c, d, l2)
        a2, b2 = c.alpha ** 2, c.beta ** 2
        assert np.max(np.abs(m.real)) < 1e-9
        assert np.max(np.abs(m.sum(-1) + 1j * l2)) < 1e-9
        e2 = m[:, 0] * m[:, 1] + m[:, 0] * m[:, 2] + m[:, 1] * m[:, 2]
        t2 = 2 * (a2 + b2) + d * d
        assert np.max(np.abs(e2 - t2) / np.abs(t2)) < 1e-8
        e3 = np.prod(m, axis=-1)
        t3 = 1j * (2 * d * (a2 - b2) - l2 * d * d)
        assert np.max(np.abs(e3 - t3) / np.maximum(np.abs(t3), 1e-300)) < 1e-8 or \
            np.max(np.abs(e3 - t3)) < 1e-8 * np.max(np.abs(m)) ** 3


def test_delta_zero_for_antisymmetric_init():
    c = one(3)
    m = characteristic_roots(c, 1.0, 2.0)
    d = delta_coefficients(np.array([0, 0.6, -0.6, 0]), m, c, 1.0, 2.0)
    assert np.max(np.abs(d)) == 0


def test_delta_matches_vandermonde():
    c = one(0)
    q = coherent_weights(2.0, 0.0, 3)
    init = np.array([q[0], 0, 0, 0], dtype=complex)
    m = characteristic_roots(c, 2.0, 5.0)
    d = delta_coefficients(init, m, c, 2.0, 5.0)
    K0, K1 = 0.0, -2j * c.alpha * init[0]
    K2 = -2 * c.alpha * 2.0 * init[0] - 5j * K1
    ref = np.linalg.solve(np.vander(m, 3, increasing=True).T, [K0, K1, K2])
    np.testing.assert_allclose(d, ref, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(0, 500), d=st.floats(-10, 10), l2=st.floats(-10, 10),
       re=st.lists(st.floats(-1, 1), min_size=4, max_size=4),
       im=st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_delta_reproduces_initial_derivatives(n, d, l2, re, im):
    c = one(n)
    init = np.array(re) + 1j * np.array(im)
    m = characteristic_roots(c, d, l2)
    delta = delta_coefficients(init, m, c, d, l2)
    a, b = c.alpha, c.beta
    K0 = init[1] + init[2]
    K1 = -1j * (2 * a * init[0] + 2 * b * init[3] + l2 * K0)
    K2 = -2 * a * d * init[0] + 2 * b * d * init[3] - 2 * (a * a + b * b) * K0 - 1j * l2 * K1
    assert abs(delta.sum() - K0) < 1e-10
    scale = 1 + np.max(np.abs(m)) ** 2
    assert abs(np.sum(delta * m) - K1) < 1e-8 * scale
    assert abs(np.sum(delta * m * m) - K2) < 1e-8 * scale ** 1.5


def test_degenerate_fallback_path():
    # identical roots (measure zero) must be refused rather than divided by
    c = one(0)
    with pytest.raises(DegenerateSpectrumError):
        delta_coefficients(np.array([1, 0, 0, 0]), np.array([1j, 1j, 1j]), c, 0.0, 0.0)
    # a close but resolvable pair goes through the Vandermonde solve
    m = np.array([-1j, 1e-8j, 2e-8j + 1j * 1e-3])
    d = delta_coefficients(np.array([0.3, 0.1, 0.2, 0.4]), m, c, 0.0, 0.0)
    assert np.all(np.isfinite(d))


def test_safe_phase_integral():
    assert safe_phase_integral(0.0, 5.0) == 5.0
    assert abs(safe_phase_integral(1j, math.pi) - 2j) < 1e-15
    # 50-digit reference
    assert abs(safe_phase_integral(1e-7, 3.0) - 3.000000450000045000003375) < 1e-12 * 3
    # continuity across the switchover radius
    for z in (0.999999e-6, 1.000001e-6, 0.999999e-6j, 1.000001e-6j):
        for tau in (0.5, 40.0):
            exact = (cmath.exp(z * tau) - 1) / z if abs(z * tau) > 1e-3 else None
            got = safe_phase_integral(z, tau)
            series = tau * sum((z * tau) ** k / math.factorial(k + 1) for k in range(20))
            assert abs(got - series) <= 1e-12 * abs(series)
            if exact is not None:
                assert abs(got - exact) <= 1e-12 * abs(exact)
    assert abs(safe_phase_integral(2j, 1.0, shift=-2j) - 1.0) < 1e-15


def test_evolve_block_identity_at_zero():
    c = one(4)
    init = np.array([0.1, 0.2j, -0.3, 0.4])
    sp = block_spectrum(c, 1.5, 2.5, init)
    np.testing.assert_array_equal(evolve_block(sp, init, 0.0), init)


def test_symmetric_init_stays_symmetric():
    c = one(2)
    init = np.array([0.5, 0.5, 0.5, 0.5])
    sp = block_spectrum(c, 1.0, 3.0, init)
    y = evolve_block(sp, init, np.linspace(0, 30, 301))
    assert np.max(np.abs(y[:, 1] - y[:, 2])) < 1e-13


def test_antisymmetric_channel_modulus():
    c = BlockCouplings.for_blocks(np.arange(40))
    rng = np.random.default_rng(5)
    init = rng.normal(size=(40, 4)) + 1j * rng.normal(size=(40, 4))
    sp = block_spectrum(c, -2.0, 4.0, init)
    y = evolve_block(sp, init, np.linspace(0, 50, 101))
    diff = np.abs(y[..., 1] - y[..., 2]) - np.abs(init[:, 1] - init[:, 2])
    assert np.max(np.abs(diff)) < 1e-12


def test_ode_residual_central_difference():
    c = BlockCouplings.for_blocks(np.arange(20))
    rng = np.random.default_rng(2)
    init = rng.normal(size=(20, 4)) + 1j * rng.normal(size=(20, 4))
    init /= np.linalg.norm(init)
    d, l2, h = 1.7, -3.1, 1e-5
    sp = block_spectrum(c, d, l2, init)
    for tau in (0.3, 4.0, 17.0):
        y = evolve_block(sp, init, np.array([tau - h, tau, tau + h]))
        fd = (y[2] - y[0]) / (2 * h)
        rhs = rhs_block(tau, y[1], c.alpha[:, None][:, 0], c.beta, d, l2)
        assert np.max(np.abs(fd - rhs)) < 1e-6


def test_block_against_scipy_ode():
    c = one(0)
    q = coherent_weights(2.0, 0.0, 3)
    a = 1 / math.sqrt(2)
    init = np.array([q[0] * a, 0, 0, q[2] * a], dtype=complex)
    sp = block_spectrum(c, 2.0, 5.0, init)
    got = evolve_block(sp, init, 10.0)
    sol = solve_ivp(lambda t, y: rhs_block(t, y, c.alpha, c.beta, 2.0, 5.0), (0, 10), init,
                    method="DOP853", rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(got, sol.y[:, -1], atol=1e-8)
    rk = integrate_block(init, c, 2.0, 5.0, 10.0, IntegratorConfig())
    np.testing.assert_allclose(got, rk, atol=1e-8)


def test_excited_nbar2_matches_oracle():
    p = SystemParams(nbar=2.0)
    s0 = assemble_initial(preset_state("excited_excited"), p, FockTruncation(choose_cutoff(2.0)))
    got = evolve_state(s0, 1.0, p)
    c = BlockCouplings.for_blocks(np.arange(s0.blocks.shape[0]))
    ref = integrate_block(s0.blocks, c, 0.0, 0.0, 1.0)
    np.testing.assert_allclose(got.blocks, ref, atol=1e-8)


def test_norms_conserved():
    p = SystemParams(lambda2=3.0, detuning=-1.0, nbar=40.0)
    s0 = assemble_initial(preset_state("w_like"), p, FockTruncation(choose_cutoff(40.0)))
    st_ = AnalyticPropagator(s0, p).evolve(np.linspace(0, 100, 201))
    assert np.max(np.abs(total_norm(st_) - total_norm(s0))) < 1e-10
    assert np.max(np.abs(block_norm(st_) - block_norm(s0))) < 1e-10


def test_spectrum_is_cached():
    p = SystemParams(lambda2=1.25, detuning=0.5, nbar=10.0)
    s0 = assemble_initial(preset_state("bell_correlated"), p, FockTruncation(choose_cutoff(10.0)))
    a = AnalyticPropagator(s0, p).spectrum.m
    b = AnalyticPropagator(s0, p).spectrum.m
    assert a is b
