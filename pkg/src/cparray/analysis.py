"""Power-law exponents and the regime classifier for the CP force.

Four regimes are distinguished by comparing the height ``h`` with the
lattice constant ``a`` and the transition wavelength ``lambda0``:

=========================  =====================================  ========
label                      condition (``<<`` means ratio >= t)    exponent
=========================  =====================================  ========
single_atom_nonretarded    h << a and h << lambda0                -7
collective_nonretarded     a <= h << lambda0 and a << lambda0     -5
collective_retarded        h >> lambda0 and a <= lambda0          -6
crossover                  anything else                          none
=========================  =====================================  ========
"""

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np


class RegimeLabel(str, Enum):
    SINGLE_ATOM_NONRETARDED = "single_atom_nonretarded"
    COLLECTIVE_NONRETARDED = "collective_nonretarded"
    COLLECTIVE_RETARDED = "collective_retarded"
    CROSSOVER = "crossover"

    @property
    def exponent(self):
        return _EXPONENTS[self]


_EXPONENTS = {
    RegimeLabel.SINGLE_ATOM_NONRETARDED: -7.0,
    RegimeLabel.COLLECTIVE_NONRETARDED: -5.0,
    RegimeLabel.COLLECTIVE_RETARDED: -6.0,
    RegimeLabel.CROSSOVER: math.nan,
}


def local_exponents(h, F):
    """Three-point slopes of ``ln|F|`` against ``ln h``.

    Interior points use the centred (non-uniform) three-point formula and the
    two ends the one-sided three-point formula. Points whose stencil contains
    a sign change or a zero of ``F`` are returned as NaN.
    """
    h = np.asarray(h, dtype=float)
    F = np.asarray(F, dtype=float)
    if h.shape != F.shape or h.ndim != 1:
        raise ValueError("h and F must be 1-D arrays of equal length")
    if len(h) < 3:
        raise ValueError("at least three points are needed")
    if np.any(np.diff(h) <= 0) or np.any(h <= 0):
        raise ValueError("h must be positive and strictly ascending")
    sign = np.sign(F)
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.gradient(np.log(np.abs(F)), np.log(h), edge_order=2)
    bad = sign == 0
    change = sign[1:] != sign[:-1]
    bad[1:] |= change
    bad[:-1] |= change
    # the end stencils reach one point further in
    bad[0] |= change[1]
    bad[-1] |= change[-2]
    return np.where(bad, np.nan, slopes)


def classify_regime(h, a, lambda0, threshold=5.0):
    """Regime label for a single ``(h, a, lambda0)`` triple."""
    if not (h > 0 and a > 0 and lambda0 > 0):
        raise ValueError("h, a and lambda0 must be positive")
    if not threshold > 1:
        raise ValueError("threshold must exceed 1")
    t = threshold
    if t * h <= a and t * h <= lambda0:
        return RegimeLabel.SINGLE_ATOM_NONRETARDED
    if h >= a and t * h <= lambda0 and t * a <= lambda0:
        return RegimeLabel.COLLECTIVE_NONRETARDED
    if h >= t * lambda0 and a <= lambda0:
        return RegimeLabel.COLLECTIVE_RETARDED
    return RegimeLabel.CROSSOVER


@dataclass
class RegimeGrid:
    """Regime labels on a grid of ``(h / lambda0, a / lambda0)``."""

    h_over_lambda0: np.ndarray
    a_over_lambda0: np.ndarray
    labels: list

    def to_csv(self, path):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("h_over_lambda0,a_over_lambda0,regime,nominal_exponent\n")
            for i, x in enumerate(self.h_over_lambda0):
                for j, y in enumerate(self.a_over_lambda0):
                    lab = self.labels[i][j]
                    fh.write(f"{x:.16e},{y:.16e},{lab.value},{lab.exponent}\n")


def regime_grid(h_over_lambda0, a_over_lambda0, threshold=5.0):
    """Classify every point of a rectangular grid (dimensionless ratios)."""
    hs = np.asarray(h_over_lambda0, dtype=float)
    as_ = np.asarray(a_over_lambda0, dtype=float)
    labels = [[classify_regime(x, y, 1.0, threshold) for y in as_] for x in hs]
    return RegimeGrid(hs, as_, labels)


def fit_exponent(h, F):
    """Least-squares slope of ``ln|F|`` against ``ln h`` over a window."""
    h = np.asarray(h, dtype=float)
    F = np.asarray(F, dtype=float)
    slope, _ = np.polyfit(np.log(h), np.log(np.abs(F)), 1)
    return float(slope)
