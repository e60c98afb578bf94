"""Trap-frequency measurement of the CP curvature.

A probe atom held in an axial trap of angular frequency ``omega0`` above an
array feels the extra curvature ``U''`` of the CP potential, so

    omega_eff = sqrt(omega0^2 + U'' / m).

The shift is read out by parametric excitation: modulating the trap depth as
``1 + eps cos(Omega t)`` amplifies the motion when ``Omega = 2 omega_eff``.
This module simulates that readout, the positional jitter of trapped atoms,
and the effect of that jitter on the force (Monte Carlo over array disorder).
"""

from dataclasses import dataclass, field, replace
import math

import numba
import numpy as np

from .atoms import RB87_MASS
from .constants import HBAR, KB, TWO_PI

DEFAULT_TRAP_FREQUENCY = 500e3
CURVATURE_STEP = 5e-3
CURVATURE_FLAG = 5e-2
RESPONSE_WINDOW = 0.1
_RENORM = 1e150


class TrapInstabilityError(ValueError):
    """The CP curvature overwhelms the trap (``omega0^2 + U''/m <= 0``)."""


def omega_from_frequency(value, convention="cycles"):
    """Angular frequency for a trap frequency quoted as ``value``.

    ``convention="cycles"`` reads ``value`` in Hz (``2 pi value`` rad/s);
    ``"angular"`` takes it literally as rad/s.
    """
    if convention == "cycles":
        return TWO_PI * value
    if convention == "angular":
        return float(value)
    raise ValueError("convention must be 'cycles' or 'angular'")


@dataclass(frozen=True)
class TrapConfig:
    """Axial trap and modulation parameters.

    Attributes
    ----------
    omega_trap : float
        Bare axial trap frequency (rad/s).
    mass : float
        Atomic mass (kg).
    epsilon : float
        Relative modulation depth.
    Omega : float or None
        Drive frequency (rad/s); ``None`` means ``2 omega_trap``.
    damping : float or None
        Velocity damping rate (1/s); ``None`` means ``1e-3 omega_eff``.
    duration : float or None
        Integration time (s); ``None`` means 1000 trap periods.
    temperature : float
        Temperature of the atom (K).
    steps_per_period : int
        Integrator steps per drive period (at least 200).
    """

    omega_trap: float = TWO_PI * DEFAULT_TRAP_FREQUENCY
    mass: float = RB87_MASS
    epsilon: float = 0.01
    Omega: float = None
    damping: float = None
    duration: float = None
    temperature: float = 1e-6
    steps_per_period: int = 200

    def __post_init__(self):
        bad = []
        if not self.omega_trap > 0:
            bad.append("omega_trap")
        if not self.mass > 0:
            bad.append("mass")
        if not 0 <= self.epsilon < 1:
            bad.append("epsilon")
        if self.damping is not None and not self.damping > 0:
            bad.append("damping")
        if self.Omega is not None and not self.Omega > 0:
            bad.append("Omega")
        if self.duration is not None and not self.duration > 0:
            bad.append("duration")
        if not self.temperature >= 0:
            bad.append("temperature")
        if self.steps_per_period < 200:
            bad.append("steps_per_period")
        if bad:
            raise ValueError(f"invalid TrapConfig fields: {', '.join(bad)}")

    def damping_for(self, omega_eff):
        return self.damping if self.damping is not None else 1e-3 * omega_eff

    def duration_for(self, omega_eff):
        return self.duration if self.duration is not None else 1000.0 * TWO_PI / omega_eff


# ---------------------------------------------------------------------------
# Trap frequency
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrapFrequency:
    """Exact and linearised effective trap frequency (rad/s)."""

    exact: float
    linearized: float

    @property
    def difference(self):
        return self.linearized - self.exact


def effective_trap_frequency(trap, curvature):
    """``omega_eff`` for a CP curvature ``d^2 U / dh^2`` (J/m^2)."""
    w0 = trap.omega_trap
    w2 = w0 * w0 + curvature / trap.mass
    if not w2 > 0:
        raise TrapInstabilityError(
            f"CP curvature {curvature:.3e} J/m^2 exceeds the trap stiffness "
            f"m omega0^2 = {trap.mass * w0 * w0:.3e} J/m^2")
    return TrapFrequency(math.sqrt(w2), w0 * (1.0 + curvature / (2.0 * trap.mass * w0 * w0)))


def curvature_from_shift(trap, delta_omega):
    """Inverse relation: the curvature producing a shift ``delta_omega`` (rad/s)."""
    w0 = trap.omega_trap
    return trap.mass * ((w0 + delta_omega) ** 2 - w0 * w0)


def force_from_curvature(h, curvature, curvature_exponent):
    """Force ``-dU/dh`` assuming ``U''`` follows a local power law locally.

    With ``U'' ~ h^p`` the potential goes as ``h^(p + 2)``, which gives
    ``F = U'' h / (-p - 1)``. The value is only as good as that assumption.
    """
    p = curvature_exponent
    if not p < -1:
        raise ValueError("curvature exponent must be below -1")
    return curvature * h / (-p - 1.0)


@dataclass(frozen=True)
class CurvatureResult:
    """Second derivative of ``U(h)`` with its Richardson check."""

    value: float
    coarse: float
    relative_change: float

    @property
    def flagged(self):
        return not self.relative_change <= CURVATURE_FLAG


def cp_curvature(h, template, grid=None, potential=None, step=CURVATURE_STEP, bz_grid=None):
    """``d^2 U_CP / dh^2`` (J/m^2) by central differences.

    Differences with ``delta = step * h`` and ``delta / 2`` are combined by
    Richardson extrapolation; their disagreement is reported and points
    where it exceeds 5 percent are flagged. ``potential(system, grid)`` may
    replace :func:`cparray.casimir.cp_potential`.
    """
    from .casimir import cp_potential, default_grid, system_at

    if not h > 0:
        raise ValueError("h must be positive")
    if potential is None:
        def potential(system, g):
            return cp_potential(system, g, bz_grid)
        if grid is None:
            grid = default_grid(system_at(template, h).species)
    d = step * h
    vals = {o: potential(system_at(template, h + o * d), grid) for o in (-1.0, -0.5, 0.0, 0.5, 1.0)}
    c1 = (vals[1.0] - 2.0 * vals[0.0] + vals[-1.0]) / (d * d)
    c2 = (vals[0.5] - 2.0 * vals[0.0] + vals[-0.5]) / (0.25 * d * d)
    best = (4.0 * c2 - c1) / 3.0
    change = abs(c2 - c1) / abs(best) if best != 0 else (0.0 if c1 == c2 else math.inf)
    return CurvatureResult(best, c2, change)


# ---------------------------------------------------------------------------
# Jitter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JitterStats:
    """Root-mean-square position spread of a trapped atom (m)."""

    sigma_thermal: float
    sigma_zpf: float

    @property
    def sigma_total(self):
        return math.hypot(self.sigma_thermal, self.sigma_zpf)


def jitter(trap):
    """Thermal and zero-point spreads added in quadrature."""
    if trap.temperature < 0:
        raise ValueError("temperature must be non-negative")
    m, w = trap.mass, trap.omega_trap
    return JitterStats(math.sqrt(KB * trap.temperature / (m * w * w)),
                       math.sqrt(HBAR / (2.0 * m * w)))


# ---------------------------------------------------------------------------
# Parametric excitation
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _integrate(z0, v0, w2, eps, Om, gam, dt, nsteps, nrec):
    """RK4 for z'' + gam z' + w2 (1 + eps cos Om t) z = 0.

    Returns ``(log of RMS of z over the last nrec steps, log of max |z|)``.
    The state is renormalised when it grows large and the scale is tracked
    in ``logscale``.
    """
    z = z0
    v = v0
    logscale = 0.0
    acc = 0.0
    logmax = -1e300
    start = nsteps - nrec
    for i in range(nsteps):
        t = i * dt
        c0 = math.cos(Om * t)
        c1 = math.cos(Om * (t + 0.5 * dt))
        c2 = math.cos(Om * (t + dt))
        k1z = v
        k1v = -gam * v - w2 * (1.0 + eps * c0) * z
        z2 = z + 0.5 * dt * k1z
        v2 = v + 0.5 * dt * k1v
        k2z = v2
        k2v = -gam * v2 - w2 * (1.0 + eps * c1) * z2
        z3 = z + 0.5 * dt * k2z
        v3 = v + 0.5 * dt * k2v
        k3z = v3
        k3v = -gam * v3 - w2 * (1.0 + eps * c1) * z3
        z4 = z + dt * k3z
        v4 = v + dt * k3v
        k4z = v4
        k4v = -gam * v4 - w2 * (1.0 + eps * c2) * z4
        z += dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if abs(z) > _RENORM or abs(v) > _RENORM:
            z /= _RENORM
            v /= _RENORM
            acc /= _RENORM * _RENORM
            logscale += math.log(_RENORM)
        az = abs(z)
        if az > 0.0:
            lz = math.log(az) + logscale
            if lz > logmax:
                logmax = lz
        if i >= start:
            acc += z * z
    return 0.5 * math.log(acc / nrec) + logscale, logmax


def _undriven_log_rms(z0, w, gam, dt, nsteps, nrec):
    """Exact late-time RMS of the damped, undriven oscillator on the same samples."""
    t = (np.arange(nsteps - nrec, nsteps) + 1) * dt
    wd = math.sqrt(max(w * w - 0.25 * gam * gam, 0.0))
    z = z0 * np.exp(-0.5 * gam * t) * (np.cos(wd * t) + 0.5 * gam / wd * np.sin(wd * t))
    return 0.5 * math.log(np.mean(z * z))


@dataclass(frozen=True)
class ParametricResult:
    """Late-time displacement amplitude of the modulated oscillator.

    ``amplitude`` is the RMS of ``z`` over the last tenth of the run,
    expressed relative to the undriven damped motion from the same seed and
    scaled to the thermal RMS (so an undriven trap returns exactly the
    thermal RMS). ``unbounded`` marks runs whose amplitude exceeded ``cap``
    times the seed amplitude, i.e. parametric instability.
    """

    Omega: float
    log_amplitude: float
    unbounded: bool
    damping: float

    @property
    def amplitude(self):
        return math.exp(min(self.log_amplitude, 700.0))


def _seed_amplitude(trap, omega_eff):
    j = jitter(replace(trap, omega_trap=omega_eff))
    return j.sigma_total


def parametric_response(trap, omega_eff, Omega=None, cap=1e6):
    """Integrate ``z'' + G z' + omega_eff^2 (1 + eps cos Omega t) z = 0``.

    The motion starts from the thermal seed ``z(0) = sigma_total, z'(0) = 0``
    (thermal and zero-point spread at ``omega_eff``). The step is
    ``(2 pi / Omega) / steps_per_period``.
    """
    Om = Omega if Omega is not None else (trap.Omega if trap.Omega is not None else 2.0 * omega_eff)
    if not (omega_eff > 0 and Om > 0):
        raise ValueError("omega_eff and Omega must be positive")
    gam = trap.damping_for(omega_eff)
    dur = trap.duration_for(omega_eff)
    dt_max = TWO_PI / (max(Om, 2.0 * omega_eff) * trap.steps_per_period)
    nsteps = int(math.ceil(dur / dt_max))
    dt = dur / nsteps
    nrec = max(1, int(RESPONSE_WINDOW * nsteps))
    z0 = _seed_amplitude(trap, omega_eff)
    lrms, lmax = _integrate(z0, 0.0, omega_eff * omega_eff, trap.epsilon, Om, gam, dt, nsteps, nrec)
    ref = _undriven_log_rms(z0, omega_eff, gam, dt, nsteps, nrec)
    unbounded = lmax > math.log(cap * z0)
    return ParametricResult(Om, math.log(z0) + lrms - ref, bool(unbounded), gam)


@dataclass
class ResonanceScan:
    """Response against drive frequency and the located peak."""

    Omega: np.ndarray
    log_amplitude: np.ndarray
    unbounded: np.ndarray
    peak_index: int
    peak_Omega: float
    omega_eff: float

    @property
    def amplitude(self):
        return np.exp(np.minimum(self.log_amplitude, 700.0))

    def to_csv(self, path, omega0):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("Omega_over_2omega0,response_amplitude,log_response,unbounded\n")
            for om, la, ub in zip(self.Omega, self.log_amplitude, self.unbounded):
                fh.write(f"{om / (2.0 * omega0):.16e},{math.exp(min(la, 700.0)):.16e},"
                         f"{la:.16e},{int(ub)}\n")


def _parabolic_peak(x, y, i):
    if i == 0 or i == len(x) - 1:
        return float(x[i])
    x0, x1, x2 = x[i - 1:i + 2]
    y0, y1, y2 = y[i - 1:i + 2]
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den
    if a >= 0:
        return float(x1)
    return float(-b / (2.0 * a))


def resonance_sweep(trap, omega_eff, Omegas, mapper=map):
    """Response at each drive frequency; the peak is refined by a parabola in log amplitude."""
    Omegas = np.asarray(Omegas, dtype=float)
    res = list(mapper(lambda om: parametric_response(trap, omega_eff, om), Omegas))
    la = np.array([r.log_amplitude for r in res])
    ub = np.array([r.unbounded for r in res])
    i = int(np.argmax(la))
    return ResonanceScan(Omegas, la, ub, i, _parabolic_peak(Omegas, la, i), omega_eff)


# ---------------------------------------------------------------------------
# Positional disorder
# ---------------------------------------------------------------------------

@dataclass
class DisorderStats:
    """Force statistics over disorder realisations (N)."""

    mean: float
    std: float
    relative_spread: float
    seed: int
    forces: np.ndarray = field(repr=False)
    reference: float = None


def patch_site_keys(n, height=True):
    """Integer lattice labels of :func:`cparray.scattering.square_patch` sites.

    Labels are centred so the same physical site keeps its label when the
    patch grows, which keeps disorder realisations nested across patch sizes.
    The probe (present when ``height``) gets the label ``None``.
    """
    half = (n - 1) // 2
    keys = [(m - half, k - half) for m in range(n) for k in range(n)]
    return ([None] if height else []) + keys


def _displacements(seed, sample, keys, sigma):
    out = np.zeros((len(keys), 3))
    for i, key in enumerate(keys):
        if key is None:
            continue
        rng = np.random.default_rng([seed, sample, key[0] + 10_000, key[1] + 10_000])
        out[i] = sigma * rng.standard_normal(3)
    return out


def disorder_monte_carlo(system, sigma, n_samples=100, grid=None, seed=0, site_keys=None,
                         step=1e-3, potential=None, mapper=map):
    """Spread of the force on the source atom under random array displacements.

    Every atom except the source (the probe) is displaced by an independent
    isotropic Gaussian of width ``sigma``. The force is the central
    difference of ``U`` under a shift ``+-step * z_probe`` of the probe along
    z, with the array configuration held fixed. Each site's displacement is
    drawn from its own generator seeded by ``(seed, sample, site key)``, so
    results are reproducible under any evaluation order.
    """
    from .casimir import cp_potential, default_grid
    from .scattering import FiniteSystem

    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    src = system.source_index
    n = system.n_atoms
    if site_keys is None:
        site_keys = [None if i == src else (i, 0) for i in range(n)]
    if len(site_keys) != n:
        raise ValueError("site_keys must label every atom")
    site_keys = [None if i == src else k for i, k in enumerate(site_keys)]
    if potential is None:
        grid = grid or default_grid(system.species)

        def potential(sys_, g):
            return cp_potential(sys_, g)

    hz = system.positions[src, 2]
    d = step * abs(hz) if hz != 0 else step
    ez = np.zeros((n, 3))
    ez[src, 2] = 1.0

    def force(positions):
        up = potential(FiniteSystem(positions + d * ez, system.species, src), grid)
        dn = potential(FiniteSystem(positions - d * ez, system.species, src), grid)
        return -(up - dn) / (2.0 * d)

    ref = force(system.positions)
    if sigma == 0:
        forces = np.full(n_samples, ref)
    else:
        forces = np.array(list(mapper(
            lambda k: force(system.positions + _displacements(seed, k, site_keys, sigma)),
            range(n_samples))))
    mean = float(np.mean(forces))
    std = float(np.std(forces, ddof=1)) if n_samples > 1 else 0.0
    if sigma == 0:
        std = 0.0
    return DisorderStats(mean, std, abs(std / mean) if mean != 0 else math.inf, seed, forces, ref)
