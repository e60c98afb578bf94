"""Physical constants (SI, CODATA 2018) and small unit helpers."""

from dataclasses import dataclass
import math


@dataclass(frozen=True)
class PhysicalConstants:
    """Immutable bundle of the SI constants used throughout the package."""

    hbar: float = 1.054571817e-34       # J s
    c: float = 2.99792458e8             # m / s
    mu0: float = 1.25663706212e-6       # H / m
    eps0: float = 8.8541878128e-12      # F / m
    kB: float = 1.380649e-23            # J / K
    e: float = 1.602176634e-19          # C
    a0: float = 5.29177210903e-11       # m
    amu: float = 1.66053906660e-27      # kg

    @property
    def elementary_charge(self):
        return self.e

    @property
    def bohr_radius(self):
        return self.a0


_CONSTANTS = PhysicalConstants()


def constants():
    """Return the shared :class:`PhysicalConstants` instance."""
    return _CONSTANTS


HBAR = _CONSTANTS.hbar
C = _CONSTANTS.c
EPS0 = _CONSTANTS.eps0
MU0 = _CONSTANTS.mu0
KB = _CONSTANTS.kB
E_CHARGE = _CONSTANTS.e
A0 = _CONSTANTS.a0
AMU = _CONSTANTS.amu

TWO_PI = 2.0 * math.pi


def wavelength_to_omega(lam):
    """Angular frequency (rad/s) of a vacuum wavelength ``lam`` in metres."""
    return TWO_PI * C / lam


def omega_to_wavelength(omega):
    """Vacuum wavelength (m) of an angular frequency in rad/s."""
    return TWO_PI * C / omega
