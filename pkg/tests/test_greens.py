from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from cparray.constants import C
from cparray.greens import (
    WeylParams,
    born_trace_kernel,
    damped_weyl_integrals,
    free_space_green,
    g_self_regularized,
    green_smeared,
    weyl_g,
    weyl_integrals,
    weyl_integrals_regularized,
)

# Frozen from adaptive Fourier quadrature (QAWF) of the defining integrals
# I0 = int cos(qz)/(b - q^2), I1 = i int q sin(qz)/(b - q^2), I2 = b I0, at b = -4, z = 0.5.
I0_REF = -0.5778636748954609
I1_REF = -1.1557273497909217j
I2_REF = 2.3114546995818435


def fourier_oracle(b, z):
    """Defining p_z integrals by Fourier-weighted quadrature (z != 0).

    With ``q = beta t`` (``b = -beta^2``) the integrals become
    ``-(1/beta) int cos(w t)/(1 + t^2) dt`` and ``-int t sin(w t)/(1 + t^2) dt``
    with ``w = beta |z|``; a finite QAWO head plus a QAWF tail evaluates them.
    ``q^2/(b - q^2) = -1 + b/(b - q^2)`` and the constant integrates to a
    delta function at z = 0, so ``I2 = b I0`` for z != 0.
    """
    beta = math.sqrt(-b)
    w = beta * abs(z)
    t_split = 40.0 + 40.0 / w

    def fourier(fn, kind):
        head = integrate.quad(fn, 0.0, t_split, weight=kind, wvar=w, epsabs=0, epsrel=1e-13,
                              limit=2000)[0]
        tail = integrate.quad(fn, t_split, np.inf, weight=kind, wvar=w, epsabs=1e-15,
                              limlst=200)[0]
        return head + tail

    c = fourier(lambda t: 1.0 / (1.0 + t * t), "cos")
    s = fourier(lambda t: t / (1.0 + t * t), "sin")
    i0 = -2.0 * c / beta
    return i0, -2j * math.copysign(1.0, z) * s, b * i0


def gaussian_oracle(b, eta):
    f0 = integrate.quad(lambda q: math.exp(-0.5 * (eta * q) ** 2) / (b - q * q),
                        -np.inf, np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
    f2 = integrate.quad(lambda q: q * q * math.exp(-0.5 * (eta * q) ** 2) / (b - q * q),
                        -np.inf, np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
    return f0, f2


# ---------------------------------------------------------------------------
# real-space tensor
# ---------------------------------------------------------------------------

def test_static_axial_values():
    h = 2.5e-7
    g = free_space_green(np.array([0.0, 0.0, h]), 0.0, scaled=True)
    base = 1.0 / (4 * math.pi * h**3)
    np.testing.assert_allclose(np.diag(g), [base, base, -2 * base], rtol=1e-14)
    assert np.count_nonzero(g - np.diag(np.diag(g))) == 0


def test_unscaled_relation(rb):
    r = np.array([0.1, 0.2, -0.3]) * rb.lambda0
    xi = 0.8 * rb.omega0
    kappa = xi / C
    np.testing.assert_allclose(free_space_green(r, xi), -free_space_green(r, xi, scaled=True) / kappa**2,
                               rtol=1e-14)


def test_unscaled_static_rejected():
    with pytest.raises(ValueError):
        free_space_green(np.array([0.0, 0.0, 1.0]), 0.0)


def test_zero_displacement_rejected():
    with pytest.raises(ValueError, match="g_self_regularized"):
        free_space_green(np.zeros(3), 1e15)


def test_large_distance_decay(rb):
    xi = rb.omega0
    kappa = xi / C
    d1, d2 = 20 * rb.lambda0, 21 * rb.lambda0
    g1 = free_space_green(np.array([0, 0, d1]), xi)[0, 0]
    g2 = free_space_green(np.array([0, 0, d2]), xi)[0, 0]
    # transverse component ~ exp(-kappa r)/r times (1 + 1/x + 1/x^2)
    expected = math.exp(-kappa * (d2 - d1)) * d1 / d2
    assert g2 / g1 == pytest.approx(expected, rel=1e-3)


def test_short_distance_divergence():
    r1, r2 = 1e-9, 2e-9
    g1 = free_space_green(np.array([r1, 0, 0]), 1e14, scaled=True)[1, 1]
    g2 = free_space_green(np.array([r2, 0, 0]), 1e14, scaled=True)[1, 1]
    assert g1 / g2 == pytest.approx(8.0, rel=1e-4)


vec = st.tuples(*(st.floats(-3.0, 3.0, allow_nan=False) for _ in range(3))).filter(
    lambda v: math.hypot(*v) > 1e-2)


@settings(max_examples=200, deadline=None)
@given(r=vec, xi_ratio=st.floats(0.0, 20.0))
def test_symmetric_even_real(rb, r, xi_ratio):
    r = np.array(r) * rb.lambda0
    xi = xi_ratio * rb.omega0
    g = free_space_green(r, xi, scaled=True)
    assert np.isrealobj(g) and np.all(np.isfinite(g))
    scale = np.abs(g).max()
    np.testing.assert_allclose(g, g.T, rtol=0, atol=1e-15 * scale)
    np.testing.assert_allclose(g, free_space_green(-r, xi, scaled=True), rtol=0, atol=1e-15 * scale)


def test_born_trace_static():
    r = 3e-7
    assert born_trace_kernel(r, 0.0) == pytest.approx(6.0 / (4 * math.pi) ** 2 / r**6, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(r=vec, xi_ratio=st.floats(0.0, 10.0))
def test_born_trace_matches_matrix_product(rb, r, xi_ratio):
    r = np.array(r) * rb.lambda0
    xi = xi_ratio * rb.omega0
    g = free_space_green(r, xi, scaled=True)
    ref = np.trace(g @ free_space_green(-r, xi, scaled=True))
    assert born_trace_kernel(np.linalg.norm(r), xi) == pytest.approx(ref, rel=1e-12)


# ---------------------------------------------------------------------------
# p_z integrals
# ---------------------------------------------------------------------------

def test_weyl_integrals_unit_case():
    i0, _, _ = weyl_integrals(-1.0, 1.0)
    assert i0 == pytest.approx(-math.pi / math.e, rel=1e-15)


def test_weyl_integrals_frozen_oracle():
    i0, i1, i2 = weyl_integrals(-4.0, 0.5)
    assert i0 == pytest.approx(I0_REF, rel=1e-8)
    assert i1.real == 0.0
    assert i1.imag == pytest.approx(I1_REF.imag, rel=1e-8)
    assert i2 == pytest.approx(I2_REF, rel=1e-8)


def test_weyl_integrals_random_pairs():
    rng = np.random.default_rng(20240611)
    worst = 0.0
    for _ in range(100):
        # beyond beta |z| ~ 10 the integral is exp(-10) of its integrand and the
        # oracle itself loses digits to cancellation
        b = -10 ** rng.uniform(-2, 2)
        z = rng.choice([-1, 1]) * 10 ** rng.uniform(-2, math.log10(8.0)) / math.sqrt(-b)
        got = weyl_integrals(b, z)
        ref = fourier_oracle(b, z)
        for g, r in zip(got, ref):
            scale = max(abs(r), 1e-300)
            worst = max(worst, abs(g - r) / scale)
    assert worst < 1e-8


def test_weyl_integrals_decay():
    vals = [np.abs(weyl_integrals(-1.0, z)) for z in (10.0, 40.0)]
    assert np.all(vals[1] < 1e-12 * vals[0])


def test_weyl_integrals_singular_inputs():
    with pytest.raises(ValueError):
        weyl_integrals(-1.0, 0.0)
    with pytest.raises(ValueError):
        weyl_integrals(0.0, 1.0)


def test_regularized_first_moment_vanishes():
    for b, a in [(-1.0, 0.1), (-3.0, 2.0), (-1e4, 1e-3)]:
        assert weyl_integrals_regularized(b, a)[1] == 0.0


def test_regularized_matches_quadrature():
    i0, _, i2 = weyl_integrals_regularized(-1.0, 0.1)
    f0, f2 = gaussian_oracle(-1.0, 0.1)
    assert i0 == pytest.approx(f0, rel=1e-8)
    assert i2 == pytest.approx(f2, rel=1e-8)


def test_regularized_small_width():
    b = -2.0
    i0_plain = weyl_integrals(b, 1e-12)[0]
    prev = None
    for a in (1e-2, 1e-4, 1e-6):
        i0, _, i2 = weyl_integrals_regularized(b, a)
        lead = -math.sqrt(2 * math.pi) / a
        assert abs(i2 / lead - 1) < 3 * a
        err = abs(i0 - i0_plain)
        if prev is not None:
            assert err < prev
        prev = err


def test_regularized_rejects_bad_width():
    with pytest.raises(ValueError):
        weyl_integrals_regularized(-1.0, 0.0)


def test_damped_integrals_match_quadrature():
    beta, z, eta = 2.0, 0.3, 0.2
    b = -beta**2
    j0, j1, j2 = damped_weyl_integrals(beta, z, eta)

    def q(fn):
        return integrate.quad(fn, -np.inf, np.inf, epsabs=0, epsrel=1e-12, limit=400)[0]

    g = lambda t: math.exp(-0.5 * (eta * t) ** 2) / (b - t * t)
    assert j0 == pytest.approx(q(lambda t: g(t) * math.cos(t * z)), rel=1e-8)
    assert j1 == pytest.approx(q(lambda t: t * g(t) * math.sin(t * z)), rel=1e-8)
    assert j2 == pytest.approx(q(lambda t: t * t * g(t) * math.cos(t * z)), rel=1e-8)


# ---------------------------------------------------------------------------
# plane-wave components
# ---------------------------------------------------------------------------

def pz_quadrature_component(p, z, xi):
    """(1/2pi) int dq exp(iqz) [-(kappa^2 delta + P P)] / (-(beta^2) - q^2), P = (px, py, q)."""
    kappa = xi / C
    b = -(kappa**2 + p[0] ** 2 + p[1] ** 2)
    k0, k1, k2 = fourier_oracle(b, z)
    out = np.zeros((3, 3), dtype=complex)
    m = [k0, k1, k2]
    P = [(p[0], 0), (p[1], 0), (1.0, 1)]
    for i in range(3):
        for j in range(3):
            ci, ni = P[i]
            cj, nj = P[j]
            val = -ci * cj * m[ni + nj]
            if i == j:
                val += -kappa**2 * k0
            out[i, j] = val / (2 * math.pi)
    return out


def test_weyl_g_zero_momentum(rb):
    g = weyl_g(WeylParams((0.0, 0.0), 0.2 * rb.lambda0, rb.omega0))
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        assert g[i, j] == 0 and g[j, i] == 0


def test_weyl_g_matches_pz_quadrature(rb):
    p = np.array([3.1e6, -1.7e6])
    z = 0.23 * rb.lambda0
    xi = 1.3 * rb.omega0
    got = weyl_g(WeylParams(tuple(p), z, xi), scaled=True)
    ref = pz_quadrature_component(p, z, xi)
    np.testing.assert_allclose(got, ref, rtol=1e-8, atol=1e-8 * np.abs(ref).max())


def test_weyl_g_parity(rb):
    p = (2.0e6, 5.0e5)
    z = 0.4 * rb.lambda0
    g = weyl_g(WeylParams(p, z, rb.omega0))
    gm = weyl_g(WeylParams((-p[0], -p[1]), z, rb.omega0))
    for i, j in [(0, 0), (1, 1), (2, 2), (0, 1)]:
        assert gm[i, j] == g[i, j]
    for i, j in [(0, 2), (1, 2)]:
        assert gm[i, j] == -g[i, j]


def test_weyl_g_requires_width_in_plane(rb):
    with pytest.raises(ValueError):
        weyl_g(WeylParams((1e6, 0.0), 0.0, rb.omega0))
    g = weyl_g(WeylParams((1e6, 0.0), 0.0, rb.omega0, a_ho=0.01 * rb.lambda0))
    assert np.all(np.isfinite(g))


# ---------------------------------------------------------------------------
# coincident-point tensor
# ---------------------------------------------------------------------------

def smeared_self_oracle(eta, xi):
    """Scaled self term: int rho(s) (2/3) kappa^2 s exp(-kappa s) ds + rho(0)/3."""
    kappa = xi / C
    norm = 1.0 / ((2 * math.pi) ** 1.5 * eta**3)
    # integrate in t = s / eta so the Gaussian sits at unit scale
    val = eta * integrate.quad(lambda t: norm * math.exp(-0.5 * t * t) * (2.0 / 3.0)
                               * kappa**2 * eta * t * math.exp(-kappa * eta * t),
                               0, np.inf, epsabs=0, epsrel=1e-12)[0]
    return val + norm / 3.0


def test_self_term_diagonal(rb):
    g = g_self_regularized(0.05 * rb.lambda0, rb.omega0)
    assert np.count_nonzero(g - np.diag(np.diag(g))) == 0
    assert g[0, 0] == g[1, 1] == g[2, 2]


def test_self_term_radial_oracle(rb):
    eta = 0.05 * rb.lambda0
    xi = rb.omega0
    kappa = xi / C
    ref = -smeared_self_oracle(eta, xi) / kappa**2
    assert g_self_regularized(eta, xi)[0, 0] == pytest.approx(ref, rel=1e-6)
    assert g_self_regularized(eta, xi, scaled=True)[0, 0] == pytest.approx(
        smeared_self_oracle(eta, xi), rel=1e-6)


def test_self_term_small_argument(rb):
    eta = 1e-4 * rb.lambda0
    xi = rb.omega0
    ka = xi / C * eta
    # with k = i kappa the leading term reads -(1/2 + (kappa a)^2) / (sqrt(pi/2) (kappa a)^3)
    lead = -(0.5 + ka**2) / (math.sqrt(math.pi / 2) * ka**3)
    kappa = xi / C
    val = g_self_regularized(eta, xi)[0, 0] * 6 * math.pi / kappa
    assert val == pytest.approx(lead, rel=1e-2)


def test_self_term_static_branch():
    eta = 1e-8
    g = g_self_regularized(eta, 0.0, scaled=True)
    assert g[0, 0] == pytest.approx(1.0 / (3 * (2 * math.pi) ** 1.5 * eta**3), rel=1e-14)
    with pytest.raises(ValueError):
        g_self_regularized(eta, 0.0)


def test_smeared_tensor_limits(rb):
    eta = 0.02 * rb.lambda0
    xi = rb.omega0
    kappa = xi / C
    far = np.array([0.0, 0.3, 0.2]) * rb.lambda0
    g = free_space_green(far, xi, scaled=True)
    np.testing.assert_allclose(green_smeared(far, xi, eta), math.exp(0.5 * (kappa * eta) ** 2) * g,
                               rtol=1e-9, atol=1e-12 * np.abs(g).max())
    np.testing.assert_allclose(green_smeared(np.zeros(3), xi, eta),
                               g_self_regularized(eta, xi, scaled=True), rtol=1e-12)
