"""Casimir-Polder interactions of atoms with atomic arrays.

Coupled-dipole (multiple-scattering) evaluation of dispersion potentials and
forces on the imaginary frequency axis, for finite clusters and for infinite
square monolayers and bilayers treated in momentum space.
"""

__version__ = "0.1.0"
