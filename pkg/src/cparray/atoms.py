"""Two-level atomic species and their polarizability on the imaginary axis.

The polarizability of a single dipole-allowed transition is

    alpha(i xi) = (2 omega0 d0**2 / hbar) / (omega0**2 + xi**2 + gamma xi)

in SI units (C m^2 / V).
"""

from dataclasses import dataclass, replace

import numpy as np

from .constants import A0, AMU, C, E_CHARGE, EPS0, HBAR, TWO_PI, wavelength_to_omega

RB87_MASS = 86.909180531 * AMU


@dataclass(frozen=True)
class AtomSpecies:
    """A single-transition atom.

    Attributes
    ----------
    omega0 : float
        Transition angular frequency in rad/s.
    gamma : float
        Damping rate entering the polarizability, rad/s.
    d0 : float
        Transition dipole moment in C m.
    mass : float
        Atomic mass in kg.
    label : str
        Human readable name.
    """

    omega0: float
    gamma: float
    d0: float
    mass: float = RB87_MASS
    label: str = "custom"

    def __post_init__(self):
        bad = []
        if not self.omega0 > 0:
            bad.append("omega0")
        if not self.gamma >= 0:
            bad.append("gamma")
        if not self.d0 > 0:
            bad.append("d0")
        if not self.mass > 0:
            bad.append("mass")
        if bad:
            raise ValueError(f"invalid AtomSpecies fields: {', '.join(bad)}")

    @property
    def lambda0(self):
        """Transition wavelength in metres."""
        return TWO_PI * C / self.omega0

    @property
    def static_polarizability(self):
        return 2.0 * self.d0**2 / (HBAR * self.omega0)

    def with_dipole(self, d0):
        return replace(self, d0=d0)


def make_species(lambda0, d0, gamma=0.0, mass=RB87_MASS, label="custom"):
    """Build a species from a wavelength (m) instead of an angular frequency."""
    return AtomSpecies(wavelength_to_omega(lambda0), gamma, d0, mass, label)


# Frequency of the 70D5/2 -> 71P transition of Rb from the quantum-defect
# expansion delta = delta0 + delta2 / (n - delta0)**2 (about 6.05 GHz).
def _rb_quantum_defect_omega(n_lower, d_lower, n_upper, d_upper):
    ry = 3.289760e15  # reduced-mass Rydberg frequency of 87Rb, Hz
    nstar_lo = n_lower - (d_lower[0] + d_lower[1] / (n_lower - d_lower[0]) ** 2)
    nstar_hi = n_upper - (d_upper[0] + d_upper[1] / (n_upper - d_upper[0]) ** 2)
    freq = ry * abs(1.0 / nstar_hi**2 - 1.0 / nstar_lo**2)
    return TWO_PI * freq


_RB_D52 = (1.34646572, -0.59600)
_RB_P32 = (2.6416737, 0.295)
RYDBERG_70D_OMEGA0 = _rb_quantum_defect_omega(70, _RB_D52, 71, _RB_P32)


def _presets():
    return {
        "rb87_d2": make_species(
            780.2e-9, 2.989 * E_CHARGE * A0, gamma=TWO_PI * 38.11e6, label="rb87_d2"
        ),
        "rydberg_53d": make_species(
            1.913e-2, 1.491e-26, gamma=0.0, label="rydberg_53d"
        ),
    }


SPECIES = _presets()


def get_species(name, d0=None, gamma=None):
    """Look up a preset by name.

    ``rydberg_70d`` has no tabulated dipole moment, so ``d0`` must be given
    for it. ``d0`` and ``gamma`` override the preset values when supplied.
    """
    if name == "rydberg_70d":
        if d0 is None:
            raise ValueError("rydberg_70d requires an explicit dipole moment d0 (C m)")
        sp = AtomSpecies(RYDBERG_70D_OMEGA0, 0.0, d0, RB87_MASS, "rydberg_70d")
    elif name in SPECIES:
        sp = SPECIES[name]
        if d0 is not None:
            sp = replace(sp, d0=d0)
    else:
        known = ", ".join(sorted(list(SPECIES) + ["rydberg_70d"]))
        raise KeyError(f"unknown species {name!r}; known presets: {known}")
    if gamma is not None:
        sp = replace(sp, gamma=gamma)
    return sp


def polarizability(species, xi):
    """Polarizability alpha(i xi) in C m^2 / V; ``xi`` may be an array."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("polarizability is defined here for xi >= 0 only")
    w0 = species.omega0
    out = (2.0 * w0 * species.d0**2 / HBAR) / (w0 * w0 + xi * xi + species.gamma * xi)
    return out if out.ndim else float(out)


def coupling_strength(species, xi):
    """``s = alpha(i xi) / eps0`` in m^3, the factor multiplying ``k^2 G``.

    The coupling term of the dipole equations,
    ``(xi^2 / c^2) (alpha / eps0) G``, equals ``-s k^2 G``.
    """
    return polarizability(species, xi) / EPS0
