from __future__ import annotations

from dataclasses import replace
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cparray.atoms import RB87_MASS
from cparray.casimir import atom_above_patch, make_frequency_grid, two_atoms
from cparray.constants import HBAR, KB, TWO_PI
from cparray.experiment import (
    TrapConfig,
    TrapInstabilityError,
    cp_curvature,
    curvature_from_shift,
    disorder_monte_carlo,
    effective_trap_frequency,
    force_from_curvature,
    jitter,
    omega_from_frequency,
    parametric_response,
    patch_site_keys,
    resonance_sweep,
)

from conftest import EXPERIMENT_HEIGHTS


@pytest.fixture(scope="module")
def trap():
    return TrapConfig()


# ---------------------------------------------------------------------------
# trap frequency
# ---------------------------------------------------------------------------

def test_zero_curvature_exact(trap):
    f = effective_trap_frequency(trap, 0.0)
    assert f.exact == trap.omega_trap
    assert f.linearized == trap.omega_trap


def test_small_curvature_linearization(trap):
    c = -trap.mass * trap.omega_trap**2 * 1e-4
    f = effective_trap_frequency(trap, c)
    assert f.exact / trap.omega_trap == pytest.approx(math.sqrt(1 - 1e-4), rel=1e-15)
    assert abs(f.difference / f.exact) < 2.5e-9


def test_instability(trap):
    with pytest.raises(TrapInstabilityError, match="stiffness"):
        effective_trap_frequency(trap, -trap.mass * trap.omega_trap**2)


@settings(max_examples=200, deadline=None)
@given(c1=st.floats(-0.99, 10.0), c2=st.floats(-0.99, 10.0))
def test_trap_frequency_monotone(c1, c2):
    trap = TrapConfig()
    k = trap.mass * trap.omega_trap**2
    lo, hi = sorted((c1, c2))
    if hi - lo < 1e-9:
        return
    assert effective_trap_frequency(trap, lo * k).exact < effective_trap_frequency(trap, hi * k).exact


def test_shift_round_trip(trap):
    dw = TWO_PI * -138.0
    c = curvature_from_shift(trap, dw)
    assert effective_trap_frequency(trap, c).exact - trap.omega_trap == pytest.approx(dw, rel=1e-9)


def test_frequency_conventions():
    assert omega_from_frequency(500e3) == TWO_PI * 500e3
    assert omega_from_frequency(500e3, "angular") == 500e3
    with pytest.raises(ValueError):
        omega_from_frequency(1.0, "hertz")


def test_trap_config_validation():
    with pytest.raises(ValueError, match="epsilon, damping"):
        TrapConfig(epsilon=1.5, damping=-1.0)
    with pytest.raises(ValueError, match="steps_per_period"):
        TrapConfig(steps_per_period=100)


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------

def test_synthetic_curvature():
    C4 = 2.3e-40
    for h in (1e-7, 6e-6, 3e-3):
        res = cp_curvature(h, lambda x: x, potential=lambda x, g: C4 * x**-4)
        assert res.value == pytest.approx(20 * C4 * h**-6, rel=1e-6)
        assert not res.flagged


def test_noisy_curvature_flagged():
    rng = np.random.default_rng(3)
    res = cp_curvature(1.0, lambda x: x, potential=lambda x, g: x**-4 * (1 + 1e-4 * rng.standard_normal()))
    assert res.flagged


def test_two_atom_retarded_curvature_slope(rb):
    g = make_frequency_grid(rb, 64)
    hs = np.array([40.0, 50.0, 60.0]) * rb.lambda0
    c = np.array([cp_curvature(h, lambda x: two_atoms(rb, x), g).value for h in hs])
    slope = np.polyfit(np.log(hs), np.log(np.abs(c)), 1)[0]
    assert abs(slope + 9) < 0.2


def test_force_from_curvature():
    h = 2.0
    # U = h^-5: U'' = 30 h^-7, F = -U' = 5 h^-6
    assert force_from_curvature(h, 30 * h**-7, -7) == pytest.approx(5 * h**-6)
    with pytest.raises(ValueError):
        force_from_curvature(h, 1.0, -0.5)


# ---------------------------------------------------------------------------
# jitter
# ---------------------------------------------------------------------------

def test_jitter_zero_temperature(trap):
    j = jitter(replace(trap, temperature=0.0))
    assert j.sigma_thermal == 0.0
    assert j.sigma_total == j.sigma_zpf


@pytest.mark.parametrize("convention", ["cycles", "angular"])
def test_jitter_conventions(convention):
    w = omega_from_frequency(500e3, convention)
    j = jitter(TrapConfig(omega_trap=w, temperature=1e-6))
    th = math.sqrt(KB * 1e-6 / (RB87_MASS * w * w))
    zp = math.sqrt(HBAR / (2 * RB87_MASS * w))
    assert j.sigma_thermal == pytest.approx(th, rel=1e-14)
    assert j.sigma_zpf == pytest.approx(zp, rel=1e-14)
    assert j.sigma_total**2 == pytest.approx(th * th + zp * zp, rel=1e-14)
    print(f"jitter ({convention}): thermal {th:.4e} m, zpf {zp:.4e} m, total {j.sigma_total:.4e} m")


def test_jitter_scaling(trap):
    a = jitter(trap)
    b = jitter(replace(trap, omega_trap=4 * trap.omega_trap))
    assert b.sigma_thermal == pytest.approx(a.sigma_thermal / 4, rel=1e-14)
    assert b.sigma_zpf == pytest.approx(a.sigma_zpf / 2, rel=1e-14)


# ---------------------------------------------------------------------------
# parametric response
# ---------------------------------------------------------------------------

def test_undriven_response_is_thermal_rms(trap):
    flat = replace(trap, epsilon=0.0)
    w = trap.omega_trap
    vals = [parametric_response(flat, w, om).amplitude for om in 2 * w * np.array([0.99, 1.0, 1.01])]
    np.testing.assert_allclose(vals, jitter(trap).sigma_total, rtol=1e-6)


@pytest.mark.parametrize("eps, gamma_ratio", [(0.01, 1e-3), (0.05, 1e-2), (0.02, 5e-3)])
def test_resonance_at_twice_omega_eff(trap, eps, gamma_ratio):
    w = 0.9995 * trap.omega_trap
    cfg = replace(trap, epsilon=eps, damping=gamma_ratio * w)
    Om = 2 * trap.omega_trap * (1 + np.linspace(-5e-3, 5e-3, 41))
    scan = resonance_sweep(cfg, w, Om)
    nearest = int(np.argmin(np.abs(Om - 2 * w)))
    assert abs(scan.peak_index - nearest) <= 1


def test_step_halving(trap):
    w = trap.omega_trap
    for om in (2 * w * 1.01, 2 * w * 0.995, 2 * w):
        a = parametric_response(trap, w, om)
        b = parametric_response(replace(trap, steps_per_period=400), w, om)
        assert abs(b.amplitude / a.amplitude - 1) < 1e-2


def test_closed_loop_peak_shift(trap, experiment_curvatures):
    """Peak difference between two heights matches the predicted omega_eff difference."""
    h1, h2 = EXPERIMENT_HEIGHTS[0], EXPERIMENT_HEIGHTS[-1]
    w = trap.omega_trap
    Om = 2 * w * (1 + np.linspace(-1e-3, 1e-3, 41))
    peaks, effs = [], []
    for h in (h1, h2):
        we = effective_trap_frequency(trap, experiment_curvatures[h].value).exact
        peaks.append(resonance_sweep(trap, we, Om).peak_Omega / 2)
        effs.append(we)
    predicted = effs[0] - effs[1]
    assert abs((peaks[0] - peaks[1]) - predicted) < 0.05 * abs(predicted)


def test_resonance_csv(trap, tmp_path):
    w = trap.omega_trap
    scan = resonance_sweep(trap, w, 2 * w * np.array([0.99, 1.0, 1.01]))
    path = tmp_path / "res.csv"
    scan.to_csv(path, w)
    lines = path.read_text().splitlines()
    assert lines[0] == "Omega_over_2omega0,response_amplitude,log_response,unbounded"
    assert float(lines[2].split(",")[0]) == 1.0


def test_order_10khz_shift_at_6um(trap, experiment_curvatures):
    """Order-of-magnitude check: |shift| at h = 6 um within a decade of 10 kHz.

    Left as computed: with the estimated 70D dipole the shift is ~0.14 kHz.
    """
    c = experiment_curvatures[EXPERIMENT_HEIGHTS[0]].value
    shift_hz = (effective_trap_frequency(trap, c).exact - trap.omega_trap) / TWO_PI
    print(f"shift at 6 um: {shift_hz:.4g} Hz")
    assert 1e3 <= abs(shift_hz) <= 1e5


# ---------------------------------------------------------------------------
# disorder Monte Carlo
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def mc_setup(rb):
    a = 0.5 * rb.lambda0
    return a, rb, make_frequency_grid(rb, 32)


def small_patch(mc_setup, n):
    a, rb, _ = mc_setup
    return atom_above_patch(rb, a, n, 0.6 * a)


def test_mc_zero_sigma(mc_setup):
    _, _, g = mc_setup
    stats = disorder_monte_carlo(small_patch(mc_setup, 3), 0.0, n_samples=5, grid=g)
    assert stats.std == 0.0 and stats.relative_spread == 0.0
    assert stats.mean == stats.reference


def test_mc_reproducible(mc_setup):
    a, _, g = mc_setup
    sys = small_patch(mc_setup, 3)
    s1 = disorder_monte_carlo(sys, 0.01 * a, n_samples=6, grid=g, seed=11)
    s2 = disorder_monte_carlo(sys, 0.01 * a, n_samples=6, grid=g, seed=11,
                              mapper=lambda f, xs: [f(x) for x in reversed(list(xs))][::-1])
    np.testing.assert_array_equal(s1.forces, s2.forces)
    assert s1.std == s2.std and s1.seed == 11
    s3 = disorder_monte_carlo(sys, 0.01 * a, n_samples=6, grid=g, seed=12)
    assert not np.array_equal(s1.forces, s3.forces)


def test_mc_linear_in_sigma(mc_setup):
    a, _, g = mc_setup
    sys = small_patch(mc_setup, 3)
    keys = patch_site_keys(3)
    spreads = {s: disorder_monte_carlo(sys, s * a, n_samples=12, grid=g, site_keys=keys).std
               for s in (0.004, 0.002, 0.001)}
    slope_a = (spreads[0.004] - spreads[0.002]) / 0.002
    slope_b = (spreads[0.002] - spreads[0.001]) / 0.001
    assert abs(slope_a / slope_b - 1) < 0.2


def test_mc_patch_size(mc_setup):
    a, _, g = mc_setup
    out = []
    for n in (3, 7):
        stats = disorder_monte_carlo(small_patch(mc_setup, n), 0.01 * a, n_samples=12, grid=g,
                                     site_keys=patch_site_keys(n))
        out.append(stats.relative_spread)
    assert abs(out[1] / out[0] - 1) < 0.1


def test_mc_validation(mc_setup):
    sys = small_patch(mc_setup, 3)
    with pytest.raises(ValueError):
        disorder_monte_carlo(sys, -1.0)
    with pytest.raises(ValueError):
        disorder_monte_carlo(sys, 1.0, n_samples=0)
    with pytest.raises(ValueError):
        disorder_monte_carlo(sys, 1.0, site_keys=[None])


def test_patch_site_keys_nested():
    k3 = patch_site_keys(3)
    k5 = patch_site_keys(5)
    assert k3[0] is None and len(k3) == 10
    assert set(k3[1:]) <= set(k5[1:])
    assert patch_site_keys(3, height=False) == k3[1:]
