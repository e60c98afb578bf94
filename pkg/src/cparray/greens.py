"""Free-space dyadic Green's tensor on the imaginary frequency axis.

Conventions
-----------
With ``k = i xi / c`` and ``kappa = xi / c`` the tensor used by the coupled
dipole equations is

    G(r) = -exp(ikr)/(4 pi r) [(1 + i/kr - 1/(kr)^2) delta
                               + (-1 - 3i/kr + 3/(kr)^2) r r / r^2]

which is real for imaginary ``k``. It diverges as ``1/xi**2`` in the static
limit, so most of the package works with the *scaled* tensor

    Gs(r) = k^2 G(r) = exp(-x)/(4 pi r^3) [(1 + x + x^2) delta
                                          - (3 + 3x + x^2) r r / r^2],

``x = kappa r``, which stays finite at ``xi = 0`` where it reduces to the
quasi-static form ``(delta - 3 r r / r^2) / (4 pi r^3)``. Every public
function takes ``scaled`` to choose between the two normalisations.

The plane-wave (Weyl) representation

    G(rho, z) = int d^2p / (2 pi)^2 g(p; z) exp(i p . rho)

is evaluated with closed-form p_z integrals. A Gaussian smearing of width
``eta`` (the zero-point spread of the atom) can be folded into these
integrals; ``eta = 0`` gives the bare transform, which requires ``z != 0``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import erfc, erfcx

from .constants import C

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
_FOUR_PI = 4.0 * math.pi


def _kappa(xi):
    if xi < 0:
        raise ValueError("xi must be non-negative")
    return xi / C


# ---------------------------------------------------------------------------
# Real-space tensor
# ---------------------------------------------------------------------------

def free_space_green(r, xi, scaled=False):
    """Green's tensor for displacement(s) ``r`` at imaginary frequency ``xi``.

    Parameters
    ----------
    r : array_like, shape (..., 3)
        Displacement(s) in metres; must be non-zero.
    xi : float
        Imaginary-axis angular frequency in rad/s.
    scaled : bool
        If True return ``k^2 G`` (units 1/m^3, finite at ``xi = 0``),
        otherwise ``G`` itself (units 1/m, requires ``xi > 0``).

    Returns
    -------
    ndarray, shape (..., 3, 3)
        Real symmetric tensor(s). The contact term is not included.
    """
    r = np.asarray(r, dtype=float)
    dist = np.linalg.norm(r, axis=-1)
    if np.any(dist == 0.0):
        raise ValueError("free_space_green needs r != 0; use g_self_regularized "
                         "for the coincident-point term")
    kappa = _kappa(xi)
    if not scaled and kappa == 0.0:
        raise ValueError("G diverges as 1/xi^2 at xi = 0; request scaled=True")
    x = kappa * dist
    pref = np.exp(-x) / (_FOUR_PI * dist**3)
    a = pref * (1.0 + x + x * x)
    b = pref * (3.0 + 3.0 * x + x * x)
    rhat = r / dist[..., None]
    out = -b[..., None, None] * rhat[..., :, None] * rhat[..., None, :]
    out += a[..., None, None] * np.eye(3)
    if not scaled:
        out /= -kappa * kappa
    return out


def born_trace_kernel(dist, xi):
    """``Tr[Gs(r) Gs(-r)]`` for the scaled tensor, as a function of distance."""
    dist = np.asarray(dist, dtype=float)
    x = _kappa(xi) * dist
    t = 1.0 + x + x * x
    lon = 2.0 + 2.0 * x
    return np.exp(-2.0 * x) * (2.0 * t * t + lon * lon) / (_FOUR_PI**2 * dist**6)


# ---------------------------------------------------------------------------
# One-dimensional p_z integrals
# ---------------------------------------------------------------------------

def _damped_exp(beta, s, eta):
    """exp(beta^2 eta^2 / 2 - beta s) * erfc((beta eta^2 - s) / (sqrt2 eta)).

    Evaluated without overflow: the scaled complementary error function is
    used whenever its argument is non-negative.
    """
    u = (beta * eta * eta - s) / (_SQRT2 * eta)
    pos = u >= 0.0
    upos = np.where(pos, u, 0.0)
    uneg = np.where(pos, -1.0, u)
    with np.errstate(over="ignore", under="ignore"):
        a = np.exp(-s * s / (2.0 * eta * eta)) * erfcx(upos)
        b = np.exp(0.5 * (beta * eta) ** 2 - beta * s) * erfc(uneg)
    return np.where(pos, a, b)


def damped_weyl_integrals(beta, z, eta):
    """Gaussian-damped p_z integrals for ``b = -beta**2``.

    Returns ``(J0, J1/i, J2)`` where, with ``b = -beta^2``,

        J_n = int dq q^n exp(i q z - eta^2 q^2 / 2) / (b - q^2).

    ``J1`` is purely imaginary and is returned divided by ``i``. For
    ``eta = 0`` the undamped integrals are returned (``z`` must then be
    non-zero); for ``z = 0`` the regularised coincident-plane forms follow.
    Arrays broadcast.
    """
    beta = np.asarray(beta, dtype=float)
    z = np.asarray(z, dtype=float)
    if eta == 0.0:
        if np.any(z == 0.0):
            raise ValueError("undamped p_z integrals need z != 0")
        e = np.exp(-beta * np.abs(z))
        return -math.pi / beta * e, -math.pi * np.sign(z) * e, math.pi * beta * e
    tm = _damped_exp(beta, z, eta)
    tp = _damped_exp(beta, -z, eta)
    ssum = tm + tp
    j0 = -0.5 * math.pi / beta * ssum
    j1 = 0.5 * math.pi * (tp - tm)
    j2 = -(_SQRT_2PI / eta) * np.exp(-z * z / (2.0 * eta * eta)) + 0.5 * math.pi * beta * ssum
    return j0, j1, j2


def weyl_integrals(b, z):
    """Closed forms of the three undamped p_z integrals (``z != 0``).

    Parameters
    ----------
    b : float
        ``Lambda^2 = k^2 - p_x^2 - p_y^2`` in 1/m^2 (negative on the
        imaginary axis; positive values follow the real-part prescription).
    z : float
        Out-of-plane displacement in metres, non-zero.

    Returns
    -------
    (I0, I1, I2)
        ``I0`` and ``I2`` real, ``I1`` purely imaginary (complex dtype).
    """
    if z == 0.0:
        raise ValueError("weyl_integrals requires z != 0; use weyl_integrals_regularized")
    if b == 0.0:
        raise ValueError("b = 0 is singular")
    root = np.sqrt(complex(-b))
    e = np.exp(-root * abs(z))
    i0 = (-math.pi / root * e).real
    i1 = 1j * (-1j * math.pi * math.copysign(1.0, z) * e).imag
    i2 = (math.pi * root * e).real
    return i0, i1, i2


def weyl_integrals_regularized(b, a_ho):
    """Gaussian-regularised p_z integrals at ``z = 0`` (``b < 0``).

    Returns ``(I0*, I1*, I2*)`` with ``I1* = 0`` exactly.
    """
    if not a_ho > 0:
        raise ValueError("a_ho must be positive")
    if b >= 0:
        raise ValueError("only the imaginary-axis branch b < 0 is implemented")
    beta = math.sqrt(-b)
    w = float(erfcx(beta * a_ho / _SQRT2))
    i0 = -math.pi / beta * w
    i2 = -_SQRT_2PI / a_ho + math.pi * beta * w
    return i0, 0.0, i2


# ---------------------------------------------------------------------------
# Plane-wave components
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeylParams:
    """Arguments of one plane-wave component ``g(p_xy; z)``."""

    p_xy: tuple
    z: float
    xi: float
    a_ho: float = 0.0


def weyl_tensor(p, z, xi, eta=0.0, scaled=True):
    """Plane-wave components ``g(p; z)`` for an array of transverse momenta.

    Parameters
    ----------
    p : array_like, shape (..., 2)
        Transverse wavevectors in 1/m.
    z : float
        Out-of-plane displacement in m.
    xi : float
        Imaginary-axis frequency, rad/s (``xi > 0``).
    eta : float
        Gaussian smearing width; 0 for the bare transform.
    scaled : bool
        Return the transform of ``k^2 G`` (default) or of ``G``.

    Returns
    -------
    ndarray, complex, shape (..., 3, 3)
    """
    p = np.asarray(p, dtype=float)
    kappa = _kappa(xi)
    px = p[..., 0]
    py = p[..., 1]
    p2 = px * px + py * py
    beta = np.sqrt(kappa * kappa + p2)
    j0, j1, j2 = damped_weyl_integrals(beta, z, eta)
    damp = np.exp(-0.5 * eta * eta * p2) / (2.0 * math.pi) if eta > 0 else 1.0 / (2.0 * math.pi)
    out = np.empty(p.shape[:-1] + (3, 3), dtype=complex)
    f0 = -j0 * damp
    out[..., 0, 0] = (kappa * kappa + px * px) * f0
    out[..., 1, 1] = (kappa * kappa + py * py) * f0
    out[..., 0, 1] = out[..., 1, 0] = px * py * f0
    f1 = -1j * j1 * damp
    out[..., 0, 2] = out[..., 2, 0] = px * f1
    out[..., 1, 2] = out[..., 2, 1] = py * f1
    out[..., 2, 2] = -(kappa * kappa * j0 + j2) * damp
    if not scaled:
        out /= -kappa * kappa
    return out


def weyl_g(params, scaled=False):
    """Plane-wave component ``g(p_xy; z)`` for a single :class:`WeylParams`.

    ``z != 0`` uses the bare integrals. ``z = 0`` requires ``a_ho > 0`` and
    returns the regularised component including the transverse factor
    ``exp(a_ho^2 (Lambda^2 - k^2) / 2) = exp(-a_ho^2 p^2 / 2)``.
    """
    if params.z == 0.0 and not params.a_ho > 0:
        raise ValueError("z = 0 requires a positive a_ho")
    if params.xi <= 0:
        raise ValueError("weyl_g requires xi > 0")
    eta = params.a_ho if params.z == 0.0 else 0.0
    return weyl_tensor(np.asarray(params.p_xy, dtype=float), params.z, params.xi,
                       eta=eta, scaled=scaled)


# ---------------------------------------------------------------------------
# Gaussian-smeared tensor
# ---------------------------------------------------------------------------

def g_self_regularized(a_ho, xi, scaled=False):
    """Gaussian-averaged tensor at the coincident point.

    Parameters
    ----------
    a_ho : float
        Width of the Gaussian position distribution (m).
    xi : float
        Imaginary-axis frequency (rad/s). ``xi = 0`` is allowed only for
        the scaled tensor, via its analytic static limit.
    scaled : bool
        Return ``k^2 G*`` instead of ``G*``.

    Returns
    -------
    ndarray, shape (3, 3)
        Real diagonal tensor.
    """
    if not a_ho > 0:
        raise ValueError("a_ho must be positive")
    kappa = _kappa(xi)
    return _self_scalar(kappa, a_ho, scaled) * np.eye(3)


def _self_scalar(kappa, eta, scaled):
    if kappa == 0.0:
        if not scaled:
            raise ValueError("G* diverges at xi = 0; request scaled=True")
        return 1.0 / (12.0 * math.pi * _SQRT_HALF_PI * eta**3)
    ka = kappa * eta
    if scaled:
        # -kappa^2 G*, written so that kappa -> 0 is smooth
        return ((0.5 + ka * ka) / (6.0 * math.pi * _SQRT_HALF_PI * eta**3)
                - kappa**3 / (6.0 * math.pi) * erfcx(ka / _SQRT2))
    return kappa / (6.0 * math.pi) * (erfcx(ka / _SQRT2)
                                      - (0.5 + ka * ka) / (_SQRT_HALF_PI * ka**3))


def green_smeared(r, xi, eta, scaled=True):
    """Gaussian convolution of the tensor, evaluated at displacement(s) ``r``.

    Includes the contact term, so it is finite everywhere and reduces to
    :func:`g_self_regularized` at ``r = 0``. Far from the origin it
    approaches ``exp(kappa^2 eta^2 / 2) G(r)``.

    Parameters
    ----------
    r : array_like, shape (..., 3)
    xi : float
    eta : float
        Smearing width (m), positive.
    scaled : bool
        Return the smeared ``k^2 G`` (default) or the smeared ``G``.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    r = np.asarray(r, dtype=float)
    kappa = _kappa(xi)
    if not scaled and kappa == 0.0:
        raise ValueError("smeared G diverges at xi = 0; request scaled=True")
    dist = np.linalg.norm(r, axis=-1)
    small = dist < 1e-4 * eta
    d = np.where(small, eta, dist)
    tm = _damped_exp(kappa, d, eta)
    tp = _damped_exp(kappa, -d, eta)
    dd = tm - tp
    ee = tm + tp
    gg = math.sqrt(2.0 / math.pi) / eta * np.exp(-d * d / (2.0 * eta * eta))
    d1 = -kappa * ee + 2.0 * gg
    d2 = kappa * kappa * dd - 2.0 * (d / eta**2) * gg
    norm = 1.0 / (8.0 * math.pi)
    phi = norm * dd / d
    phi1 = norm * (d1 / d - dd / d**2)
    phi2 = norm * (d2 / d - 2.0 * d1 / d**2 + 2.0 * dd / d**3)
    iso = kappa * kappa * phi - phi1 / d
    aniso = phi2 - phi1 / d
    rhat = r / d[..., None]
    out = -aniso[..., None, None] * rhat[..., :, None] * rhat[..., None, :]
    out += iso[..., None, None] * np.eye(3)
    if np.any(small):
        out[small] = _self_scalar(kappa, eta, True) * np.eye(3)
    if not scaled:
        out /= -kappa * kappa
    return out
