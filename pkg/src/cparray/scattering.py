"""Coupled-dipole equations for a finite cluster of identical atoms.

At imaginary frequency ``xi`` the dipoles obey

    p(r_n) = p0(r_n) - (xi^2 / c^2) (alpha / eps0) sum_{m != n} G(r_n - r_m) p(r_m),

which in terms of the scaled tensor ``Gs = k^2 G`` is ``(I - s Gs) p = p0``
with ``s = alpha(i xi) / eps0``. Only the source atom carries ``p0``.

Couplings are tiny for ground-state atoms (``s Gs ~ 1e-9``), so the induced
dipole ``dp = p - p0`` at the source is never formed by subtracting ``p0``
from ``p``. It is obtained instead from the exact rearrangement

    dp_source = [M^{-1} (s Gs)(s Gs) e]_source,

which contains no first-order term because ``Gs`` has no diagonal blocks.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.linalg

from .greens import born_trace_kernel, free_space_green
from .atoms import coupling_strength

MAX_DENSE_ATOMS = 2000
COND_LIMIT = 1e12


class IllConditionedError(np.linalg.LinAlgError):
    """The coupled-dipole matrix is numerically singular."""


@dataclass(frozen=True)
class FiniteSystem:
    """Identical atoms at fixed positions, one of which is the source."""

    positions: np.ndarray
    species: object
    source_index: int = 0

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.shape[-1] != 3:
            raise ValueError("positions must be an (N, 3) array")
        object.__setattr__(self, "positions", pos)
        if not 0 <= self.source_index < len(pos):
            raise ValueError("source_index out of range")
        if len(pos) > 1:
            d = _pair_distances(pos)
            np.fill_diagonal(d, np.inf)
            if np.min(d) == 0.0:
                raise ValueError("atom positions must be pairwise distinct")

    @property
    def n_atoms(self):
        return len(self.positions)


@dataclass
class PolarizationState:
    """Solution of the coupled-dipole equations at one frequency."""

    p: np.ndarray
    p0: np.ndarray
    xi: float
    source_index: int
    dp_source: np.ndarray

    @property
    def dp(self):
        return self.dp_source


def _pair_distances(pos):
    diff = pos[:, None, :] - pos[None, :, :]
    return np.linalg.norm(diff, axis=-1)


def load_positions(path):
    """Read a whitespace separated ``x y z`` file (metres, ``#`` comments)."""
    pos = np.loadtxt(path, comments="#", ndmin=2)
    if pos.shape[1] != 3:
        raise ValueError(f"{path}: expected three columns per line")
    return pos


def square_patch(a, n, height=None, jitter=None):
    """Positions of an ``n x n`` square patch centred on the origin.

    If ``height`` is given, a probe atom at ``(0, 0, height)`` is placed first
    (index 0). ``jitter`` is an optional ``(n*n, 3)`` displacement array.
    """
    half = (n - 1) / 2.0
    r = (np.arange(n) - half) * a
    xx, yy = np.meshgrid(r, r, indexing="ij")
    sites = np.stack([xx.ravel(), yy.ravel(), np.zeros(n * n)], axis=-1)
    if jitter is not None:
        sites = sites + jitter
    if height is None:
        return sites
    return np.concatenate([[[0.0, 0.0, height]], sites])


def coupling_blocks(positions, xi, rows=None):
    """Off-diagonal part ``Gs`` of the coupling, shape (3N, 3N) (or a row band)."""
    pos = positions
    n = len(pos)
    idx = np.arange(n) if rows is None else np.asarray(rows)
    disp = pos[idx, None, :] - pos[None, :, :]
    same = idx[:, None] == np.arange(n)[None, :]
    disp[same] = 1.0  # placeholder, zeroed below
    g = free_space_green(disp, xi, scaled=True)
    g[same] = 0.0
    return g.transpose(0, 2, 1, 3).reshape(3 * len(idx), 3 * n)


def build_coupling_matrix(sys, xi):
    """Dense ``3N x 3N`` matrix ``M`` with ``M p = p0``.

    Diagonal blocks are identities; the block coupling atom ``n`` to atom
    ``m`` is ``-(xi^2/c^2)(alpha/eps0) G(r_n - r_m) = -s Gs(r_n - r_m)``.
    """
    if xi <= 0:
        raise ValueError("build_coupling_matrix needs xi > 0")
    n = sys.n_atoms
    if n > MAX_DENSE_ATOMS:
        raise ValueError(f"{n} atoms exceeds the dense-solver limit of {MAX_DENSE_ATOMS}; "
                         "use the lattice (k-space) module for large arrays")
    s = coupling_strength(sys.species, xi)
    m = np.empty((3 * n, 3 * n))
    band = max(1, 4_000_000 // (9 * n))
    for start in range(0, n, band):
        rows = np.arange(start, min(n, start + band))
        m[3 * start:3 * rows[-1] + 3] = -s * coupling_blocks(sys.positions, xi, rows)
    m[np.diag_indices(3 * n)] = 1.0
    return m


def _factor(m, xi, sys):
    lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    anorm = np.linalg.norm(m, 1)
    rcond, info = scipy.linalg.lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or rcond < 1.0 / COND_LIMIT:
        raise IllConditionedError(
            f"coupled-dipole matrix ill conditioned (rcond={rcond:.3e}) at xi={xi:.6e} rad/s "
            f"for {sys.n_atoms} atoms, source {sys.source_index}")
    return lu, piv


def induced_response(sys, xi):
    """3x3 matrix ``D`` with ``dp_source = D p0`` for a unit source dipole.

    Column ``j`` is computed from ``x = M^{-1} (s Gs)^2 e_j``; all three
    columns share one LU factorisation.
    """
    n = sys.n_atoms
    if n == 1:
        return np.zeros((3, 3))
    m = build_coupling_matrix(sys, xi)
    off = m.copy()
    off[np.diag_indices(3 * n)] = 0.0          # off = -s Gs exactly
    src = 3 * sys.source_index
    w = -off[:, src:src + 3]                    # s Gs e_j, zero on the source
    u = -off @ w                                # (s Gs)^2 e_j
    lu, piv = _factor(m, xi, sys)
    x = scipy.linalg.lu_solve((lu, piv), u, check_finite=False)
    return x[src:src + 3]


def solve_polarizations(sys, xi, p0_direction):
    """Full polarisation state for a source dipole along ``p0_direction``.

    Returns
    -------
    PolarizationState
        ``p`` and ``p0`` per atom; ``dp_source`` computed without cancellation.
    """
    u = np.asarray(p0_direction, dtype=float)
    n = sys.n_atoms
    p0 = np.zeros((n, 3))
    p0[sys.source_index] = u
    if n == 1:
        return PolarizationState(p0.copy(), p0, xi, 0, np.zeros(3))
    m = build_coupling_matrix(sys, xi)
    lu, piv = _factor(m, xi, sys)
    p = scipy.linalg.lu_solve((lu, piv), p0.ravel(), check_finite=False).reshape(n, 3)
    off = m.copy()
    off[np.diag_indices(3 * n)] = 0.0
    w = -off @ p0.ravel()
    x = scipy.linalg.lu_solve((lu, piv), -off @ w, check_finite=False).reshape(n, 3)
    return PolarizationState(p, p0, xi, sys.source_index, x[sys.source_index])


def born_response_trace(sys, xi):
    """Second-order ``Tr D`` for the source: ``s^2 sum_n Tr[Gs(r0 - r_n)^2]``."""
    pos = sys.positions
    r0 = pos[sys.source_index]
    others = np.delete(pos, sys.source_index, axis=0)
    if len(others) == 0:
        return 0.0
    s = coupling_strength(sys.species, xi)
    dist = np.linalg.norm(others - r0, axis=-1)
    return s * s * math.fsum(born_trace_kernel(dist, xi))
