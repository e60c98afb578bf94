"""Casimir-Polder potentials and forces from imaginary-frequency quadrature.

The potential of a reference atom is

    U = -(hbar / 2 pi) int_0^inf dxi  Tr D(xi),

where ``D`` maps the source dipole to the dipole it induces on itself via
scattering off every other atom (``dp = D p0``). The three diagonal channels
of ``D`` are the per-channel induced-polarisation ratios. For finite clusters
``D`` comes from :mod:`cparray.scattering`, for infinite lattices from
:mod:`cparray.lattice`.

At second order in the coupling (Born level) the same integral reduces to

    U_B = -(hbar / 2 pi) int dxi s(xi)^2 sum_n Tr[Gs(r_n - r_0)^2],

with ``s = alpha / eps0`` and the scaled tensor ``Gs = k^2 G``. The lattice
version of the site sum is evaluated either directly or by Poisson summation
(:func:`lattice_power_sum`).
"""

from dataclasses import dataclass, field
import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from .atoms import coupling_strength, polarizability
from .constants import C, HBAR
from .lattice import BZGrid, LatticeSpec, response_matrix
from .scattering import FiniteSystem, born_response_trace, induced_response, square_patch

PANEL_ORDER = 8
XI_MIN_FRACTION = 1e-9
DEFAULT_CUTOFF = 2.0 * math.pi * 1e18
SKIP_EXPONENT = 80.0
FORCE_STEP = 1e-3
FORCE_FLAG = 1e-2
_BORN_POLY = (6.0, 12.0, 10.0, 4.0, 2.0)


class NodeSolveError(RuntimeError):
    """A frequency-node solve failed; ``xi`` records the offending node."""

    def __init__(self, xi, cause):
        super().__init__(f"solve failed at xi = {xi:.6e} rad/s: {cause}")
        self.xi = xi
        self.cause = cause


# ---------------------------------------------------------------------------
# Frequency grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyGrid:
    """Quadrature rule for ``int_0^cutoff dxi``.

    Attributes
    ----------
    nodes, weights : ndarray
        Ascending nodes in (0, cutoff] and positive weights (rad/s).
    cutoff : float
        Upper limit of the integral (rad/s).
    scheme : str
        Description of the rule.
    """

    nodes: np.ndarray
    weights: np.ndarray
    cutoff: float
    scheme: str = "composite-gl-log"

    def integrate(self, values):
        """Apply the rule to node values (leading axis = nodes)."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))

    def __len__(self):
        return len(self.nodes)


def _gl_panel(lo, hi, x, w):
    return lo + (hi - lo) * x, (hi - lo) * w


def make_frequency_grid(species, n_nodes=128, cutoff=None, breaks=()):
    """Composite Gauss-Legendre grid on a logarithmic frequency axis.

    The axis ``[xi_min, cutoff]`` with ``xi_min = 1e-9 omega0`` is split into
    equal panels in ``ln xi``, each carrying an 8-point rule; the panel edge
    closest to ``omega0`` (and to each value in ``breaks``) is moved onto it.
    One more 8-point panel, linear in ``xi``, covers ``[0, xi_min]``.

    Parameters
    ----------
    species : AtomSpecies
    n_nodes : int
        Total node count, rounded up to a multiple of 8; at least 16.
    cutoff : float, optional
        Upper limit (rad/s); defaults to ``max(2 pi 1e18, 1e6 omega0)``.
    breaks : sequence of float
        Extra frequencies that should coincide with panel edges.
    """
    w0 = species.omega0
    if n_nodes < 16:
        raise ValueError("make_frequency_grid needs n_nodes >= 16")
    if cutoff is None:
        cutoff = max(DEFAULT_CUTOFF, 1e6 * w0)
    if not cutoff >= 10.0 * w0:
        raise ValueError(f"cutoff {cutoff:.3e} rad/s is below 10 omega0 = {10 * w0:.3e} rad/s")
    xi_min = XI_MIN_FRACTION * w0
    n_panels = -(-n_nodes // PANEL_ORDER) - 1
    edges = np.linspace(math.log(xi_min), math.log(cutoff), n_panels + 1)
    for b in (w0, *breaks):
        lb = math.log(b)
        if edges[0] < lb < edges[-1]:
            i = int(np.argmin(np.abs(edges[1:-1] - lb))) + 1 if n_panels > 1 else None
            if i is not None and edges[i - 1] < lb < edges[i + 1]:
                edges[i] = lb
    x, w = leggauss(PANEL_ORDER)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    nodes = [xi_min * x]
    weights = [xi_min * w]
    for lo, hi in zip(edges[:-1], edges[1:]):
        u, wu = _gl_panel(lo, hi, x, w)
        xi = np.exp(u)
        nodes.append(xi)
        weights.append(wu * xi)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    return FrequencyGrid(nodes, weights, float(cutoff),
                         f"composite-gl{PANEL_ORDER}-log x{n_panels} + linear head")


def default_grid(species, n_nodes=128):
    return make_frequency_grid(species, n_nodes)


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------

def two_atoms(species, h):
    """Two atoms separated by ``h`` along z; the source is the first."""
    return FiniteSystem(np.array([[0.0, 0.0, 0.0], [0.0, 0.0, h]]), species, 0)


def atom_above_patch(species, a, n, h):
    """Probe atom at height ``h`` above the centre site of an ``n x n`` patch."""
    return FiniteSystem(square_patch(a, n, height=h), species, 0)


def _min_path(system):
    """Shortest distance from the reference atom to any scatterer."""
    if isinstance(system, LatticeSpec):
        return system.a if system.h is None else system.h
    pos = system.positions
    if len(pos) < 2:
        return math.inf
    d = np.linalg.norm(np.delete(pos, system.source_index, axis=0) - pos[system.source_index], axis=-1)
    return float(np.min(d))


def response_trace(system, xi, bz_grid=None, method="auto"):
    """``Tr D(xi)`` for a finite cluster or a lattice configuration."""
    if isinstance(system, LatticeSpec):
        d, _ = response_matrix(system, xi, bz_grid or BZGrid(), method)
        return float(np.real(np.trace(d)))
    if isinstance(system, FiniteSystem):
        return float(np.trace(induced_response(system, xi)))
    raise TypeError(f"unsupported system type {type(system).__name__}")


def _node_values(system, grid, fn):
    rmin = _min_path(system)
    out = np.zeros(len(grid.nodes))
    for i, xi in enumerate(grid.nodes):
        if 2.0 * xi * rmin / C > SKIP_EXPONENT:
            continue
        try:
            out[i] = fn(xi)
        except (np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
            raise NodeSolveError(float(xi), exc) from exc
    return out


def cp_potential(system, grid=None, bz_grid=None, method="auto"):
    """Casimir-Polder potential (J) of the reference atom.

    Parameters
    ----------
    system : FiniteSystem or LatticeSpec
        For a finite cluster the reference atom is ``source_index``. For a
        lattice see :func:`cparray.lattice.response_matrix`; for a bilayer
        the ``h``-dependent inter-layer part is returned, so ``U -> 0`` as
        the layers separate.
    grid : FrequencyGrid, optional
        Defaults to a 128-node grid for the system's species.
    bz_grid : BZGrid, optional
        Brillouin-zone rule for lattice systems.

    Raises
    ------
    NodeSolveError
        If the solve at any frequency node fails.
    """
    grid = grid or default_grid(system.species)
    vals = _node_values(system, grid, lambda xi: response_trace(system, xi, bz_grid, method))
    return -HBAR / (2.0 * math.pi) * float(grid.integrate(vals))


# ---------------------------------------------------------------------------
# Born level and lattice sums
# ---------------------------------------------------------------------------

def _direct_power_sum(h, a, decay, coeffs, tol):
    """Direct site sum of ``exp(-decay R) sum_p c_p R^-p`` plus a continuum tail."""
    powers = [p for p, c in coeffs.items() if c != 0.0]
    pmin = min(powers)
    # tail beyond radius rho ~ (2 pi / a^2) c rho^(2-p) / (p-2); choose rho so it is < tol * head
    head = sum(c * h ** (-p) for p, c in coeffs.items() if c != 0.0) if h > 0 else \
        sum(c * a ** (-p) for p, c in coeffs.items() if c != 0.0)
    cmax = max(abs(coeffs[p]) for p in powers)
    if pmin > 2:
        rho = (2.0 * math.pi * cmax / (a * a * tol * abs(head) * (pmin - 2))) ** (1.0 / (pmin - 2))
    else:
        rho = math.inf
    if decay > 0:
        rho = min(rho, (math.log(1.0 / tol) + 10.0) / decay + a)
    rho = min(max(rho, 4.0 * a), 1500.0 * a)
    m = int(math.ceil(rho / a))
    idx = np.arange(-m, m + 1, dtype=float)
    gx, gy = np.meshgrid(idx, idx, indexing="ij")
    rho2 = (gx * gx + gy * gy).ravel() * a * a
    keep = rho2 <= rho * rho
    if h == 0.0:
        keep &= rho2 > 0.0
    r = np.sqrt(rho2[keep] + h * h)
    terms = np.zeros_like(r)
    for p, c in coeffs.items():
        if c != 0.0:
            terms += c * r ** (-float(p))
    total = math.fsum(np.exp(-decay * r) * terms)
    r0 = math.sqrt(rho * rho + h * h)
    tail = 0.0
    for p, c in coeffs.items():
        if c == 0.0:
            continue
        # int_{r0}^inf R^(1-p) exp(-decay R) dR = r0^(2-p) E_{p-1}(decay r0)
        tail += c * r0 ** (2 - p) * float(special.expn(p - 1, decay * r0))
    return total + 2.0 * math.pi / (a * a) * tail


def _poisson_power_sum(h, a, decay, coeffs, tol):
    """Poisson (reciprocal-lattice) form of the same site sum, ``h > 0``."""
    # the q = 0 term is itself damped by exp(-decay h), so the cutoff grows with decay
    qmax = (math.log(1.0 / tol) + 6.0) / h + decay
    m = int(math.ceil(qmax * a / (2.0 * math.pi)))
    idx = np.arange(-m, m + 1)
    gx, gy = np.meshgrid(idx, idx, indexing="ij")
    n2 = (gx * gx + gy * gy).ravel()
    n2 = n2[n2 * (2.0 * math.pi / a) ** 2 <= qmax * qmax]
    uniq, counts = np.unique(n2, return_counts=True)
    q = 2.0 * math.pi / a * np.sqrt(uniq.astype(float))
    items = [(p, c) for p, c in coeffs.items() if c != 0.0]

    def integrand(u):
        t = decay + u
        beta = np.sqrt(q * q + t * t)
        poly = sum(c * u ** (p - 2) / math.factorial(p - 2) for p, c in items)
        return poly * np.exp(-h * beta) / beta

    scale = 1.0 / h
    val, _ = integrate.quad_vec(lambda v: integrand(v * scale) * scale, 0.0, math.inf,
                                epsabs=0.0, epsrel=min(1e-10, tol))
    fq = 2.0 * math.pi * val
    return math.fsum(counts * fq) / (a * a)


def lattice_power_sum(h, a, decay, coeffs, tol=1e-10):
    """``sum_n exp(-decay R_n) sum_p c_p R_n^-p`` over a square lattice.

    ``R_n`` is the distance from a point at height ``h`` above site (0, 0) to
    site ``n``; with ``h = 0`` the coincident site is omitted. ``coeffs`` maps
    integer powers ``p >= 2`` to coefficients. Heights ``h >= a / 4`` use the
    Poisson form, in which each reciprocal vector ``q`` contributes

        F(q) = 2 pi int_0^inf du P(u) exp(-h beta) / beta,
        beta = sqrt(q^2 + (decay + u)^2),  P(u) = sum_p c_p u^(p-2) / (p-2)!;

    smaller heights are summed directly with a continuum tail correction.
    """
    if h < 0 or not a > 0:
        raise ValueError("need h >= 0 and a > 0")
    coeffs = {int(p): float(c) for p, c in dict(coeffs).items()}
    if any(p < 2 for p in coeffs):
        raise ValueError("powers must be >= 2")
    if decay == 0.0:
        coeffs = {p: c for p, c in coeffs.items() if p > 2}
    if not coeffs:
        return 0.0
    if h >= 0.25 * a:
        return _poisson_power_sum(h, a, decay, coeffs, tol)
    return _direct_power_sum(h, a, decay, coeffs, tol)


def lattice_sum_S(h, a, xi=0.0, tol=1e-10):
    """``S(h; xi) = sum_n exp(-2 xi R_n / c) / R_n^6`` (1/m^6)."""
    if not (h > 0 and a > 0):
        raise ValueError("lattice_sum_S needs h > 0 and a > 0")
    return lattice_power_sum(h, a, 2.0 * xi / C, {6: 1.0}, tol)


def born_lattice_trace(h, a, xi, tol=1e-10):
    """``sum_n Tr[Gs(R_n)^2]`` for a point at height ``h`` over a square lattice."""
    kappa = xi / C
    coeffs = {6 - j: c * kappa**j / (16.0 * math.pi**2) for j, c in enumerate(_BORN_POLY)}
    return lattice_power_sum(h, a, 2.0 * kappa, coeffs, tol)


def born_potential(system, grid=None, tol=1e-10):
    """Second-order (Born) potential (J).

    For a :class:`FiniteSystem` the site sum runs over every other atom. For a
    :class:`LatticeSpec` it runs over the lattice seen from the reference
    atom: the probe at ``h`` for a monolayer, the other layer for a bilayer
    (which at this order is the whole ``h``-dependent part), or the rest of
    the plane when ``h`` is ``None``.
    """
    grid = grid or default_grid(system.species)
    sp = system.species
    if isinstance(system, LatticeSpec):
        h = 0.0 if system.h is None else system.h

        def fn(xi):
            s = coupling_strength(sp, xi)
            return s * s * born_lattice_trace(h, system.a, xi, tol)
    else:
        def fn(xi):
            return born_response_trace(system, xi)
    vals = _node_values(system, grid, fn)
    return -HBAR / (2.0 * math.pi) * float(grid.integrate(vals))


# ---------------------------------------------------------------------------
# Forces
# ---------------------------------------------------------------------------

def system_at(template, h):
    """Instantiate a geometry template at height/separation ``h``."""
    if isinstance(template, LatticeSpec):
        return template.with_height(h)
    if callable(template):
        return template(h)
    raise TypeError("template must be a LatticeSpec or a callable h -> system")


@dataclass
class CpResult:
    """Potential and force on a sweep of heights.

    ``convergence`` is the relative disagreement between the two finite
    difference steps after Richardson extrapolation; ``flags`` marks points
    where it exceeded 1 percent.
    """

    h_values: np.ndarray
    U: np.ndarray
    F: np.ndarray
    local_exponent: np.ndarray
    convergence: np.ndarray
    lambda0: float
    flags: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def rows(self):
        for i in range(len(self.h_values)):
            yield (self.h_values[i], self.h_values[i] / self.lambda0, self.U[i], self.F[i],
                   self.local_exponent[i], self.convergence[i])

    def to_csv(self, path):
        header = "h_m,h_over_lambda0,U_J,F_N,local_exponent,conv_estimate"
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(header + "\n")
            for row in self.rows():
                fh.write(",".join(f"{v:.16e}" for v in row) + "\n")


def cp_force(h_values, template, grid=None, bz_grid=None, method="auto", mapper=map,
             step=FORCE_STEP, potential=None):
    """Potential, force ``F = -dU/dh`` and local exponents on a sweep.

    The derivative is a central difference with ``delta = step * h`` and
    Richardson extrapolation against ``delta / 2``; all stencil points use
    the same frequency grid.

    Parameters
    ----------
    h_values : sequence of float
        Strictly ascending heights (m), at least three.
    template : LatticeSpec or callable
        Geometry at a given ``h``; see :func:`system_at`.
    mapper : callable
        ``map``-like function used to evaluate the independent potentials
        (for example ``Executor.map``); results are consumed in order.
    potential : callable, optional
        Replaces :func:`cp_potential` (``potential(system, grid)``).
    """
    from .analysis import local_exponents

    h = np.asarray(h_values, dtype=float)
    if h.ndim != 1 or len(h) < 3 or np.any(np.diff(h) <= 0) or np.any(h <= 0):
        raise ValueError("h_values must be >= 3 strictly ascending positive values")
    sys0 = system_at(template, h[0])
    species = getattr(sys0, "species", None)
    if potential is None:
        grid = grid or default_grid(species)

        def potential(system, g):
            return cp_potential(system, g, bz_grid, method)
    offsets = (0.0, -1.0, 1.0, -0.5, 0.5)
    jobs = [(hi, hi * (1.0 + step * o)) for hi in h for o in offsets]
    vals = list(mapper(lambda job: potential(system_at(template, job[1]), grid), jobs))
    vals = np.array(vals).reshape(len(h), len(offsets))
    U = vals[:, 0]
    delta = step * h
    f1 = -(vals[:, 2] - vals[:, 1]) / (2.0 * delta)
    f2 = -(vals[:, 4] - vals[:, 3]) / delta
    F = (4.0 * f2 - f1) / 3.0
    with np.errstate(divide="ignore", invalid="ignore"):
        conv = np.abs(f2 - f1) / np.abs(F)
    flags = conv > FORCE_FLAG
    expo = local_exponents(h, F)
    mono = np.diff(U)
    bad = np.zeros(len(h), dtype=bool)
    if np.all(U < 0):
        nonmono = mono <= 0
        bad[:-1] |= nonmono
        bad[1:] |= nonmono
    expo = np.where(bad, np.nan, expo)
    lambda0 = species.lambda0 if species is not None else math.nan
    meta = {"step": step}
    if grid is not None:
        meta.update(grid_nodes=len(grid.nodes), cutoff=grid.cutoff)
    return CpResult(h, U, F, expo, conv, lambda0, flags, meta)



# ---------------------------------------------------------------------------
# Analytic references
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticConstants:
    """Dimensionless constants of the large-``h`` lattice-sum asymptotics.

    ``retarded`` is ``int_0^inf int_0^inf x exp(-2u sqrt(1+x^2)) / (1+x^2)^3 du dx``
    and ``nonretarded`` is ``2 pi int_0^inf r / (1+r^2)^3 dr``.
    """

    retarded: float
    retarded_error: float
    nonretarded: float
    nonretarded_error: float

    def __iter__(self):
        return iter((self.retarded, self.nonretarded))


def asymptotic_constants():
    """Evaluate both constants by adaptive quadrature."""
    c1, e1 = integrate.dblquad(
        lambda u, x: x * math.exp(-2.0 * u * math.sqrt(1.0 + x * x)) / (1.0 + x * x) ** 3,
        0.0, math.inf, 0.0, math.inf, epsabs=1e-12, epsrel=1e-10)
    c2, e2 = integrate.quad(lambda r: r / (1.0 + r * r) ** 3, 0.0, math.inf,
                            epsabs=1e-14, epsrel=1e-13)
    return AsymptoticConstants(c1, e1, 2.0 * math.pi * c2, 2.0 * math.pi * e2)


def plate_reference(h, plot_scale=1.0):
    """Ideal-conductor Casimir pressure ``pi^2 hbar c / (240 h^4)`` (N/m^2).

    ``plot_scale`` multiplies the result for overlay plots; it is 1 by default.
    """
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ValueError("plate_reference needs h > 0")
    out = plot_scale * math.pi**2 * HBAR * C / (240.0 * h**4)
    return out if out.ndim else float(out)


def lorentzian_integral(species, cutoff):
    """``int_0^cutoff alpha(i xi) dxi`` for ``gamma = 0`` in closed form."""
    w0 = species.omega0
    return 2.0 * species.d0**2 / HBAR * math.atan(cutoff / w0)


def integrate_polarizability(species, grid):
    """``int alpha(i xi) dxi`` on a frequency grid (quadrature check)."""
    return float(grid.integrate(polarizability(species, grid.nodes)))
