"""Momentum-space treatment of infinite square monolayers and bilayers.

The central object is the lattice Fourier transform of the (scaled) Green's
tensor between a plane of atoms and a point at height ``z``,

    T(k; z) = sum_n exp(-i k . r_n) Gs(r_n + z e_z),

with the coincident site ``n = 0`` omitted when ``z = 0``. Three routes are
implemented:

* direct summation over lattice sites (fast when ``xi a / c`` is large);
* Poisson summation over reciprocal vectors with the bare plane-wave
  components (fast when ``|z|`` is comparable to ``a``);
* Poisson summation of Gaussian-smeared components, where the smearing width
  ``eta`` plays the role of the atomic zero-point spread ``a_ho``.

For the smeared route the sites inside the Gaussian's reach are handled
exactly: away from its source the tensor solves the modified Helmholtz
equation, so a Gaussian average multiplies it by ``exp(kappa^2 eta^2 / 2)``.
Dividing that factor out and replacing the smeared near-site values by the
point values makes the result independent of ``eta`` to round-off, which is
what allows ``eta`` to be chosen for speed rather than fixed by physics.
``site_correction=False`` keeps the plain regularised formula instead.

All tensors here are the scaled ones (``k^2 G``); the polarisation equations
read ``(I - s T) p = p0`` with ``s = alpha / eps0``.
"""

from dataclasses import dataclass, replace
import math

import numpy as np
from numpy.polynomial.legendre import leggauss

from .atoms import coupling_strength
from .constants import C
from .greens import free_space_green, green_smeared, weyl_tensor

LOG_TOL = math.log(1e16)
DEFAULT_ETA_FRACTION = 1.0 / 3.0
_CHUNK = 400_000


class ConvergenceError(RuntimeError):
    """A lattice sum did not reach its tolerance within the shell cap."""


@dataclass(frozen=True)
class LatticeSpec:
    """Square lattice geometry.

    Attributes
    ----------
    a : float
        Lattice constant (m).
    species : AtomSpecies
        Atom occupying every site (and the probe, if any).
    layers : int
        1 for a monolayer, 2 for a bilayer.
    h : float or None
        Bilayer separation, or for a monolayer the height of a probe atom
        above site ``(0, 0)``. ``None`` for a monolayer means the reference
        atom is the site at the origin itself.
    a_ho : float or None
        Width used by the smeared reciprocal sums; defaults to ``a / 3``.
    """

    a: float
    species: object
    layers: int = 1
    h: float = None
    a_ho: float = None

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("lattice constant must be positive")
        if self.layers not in (1, 2):
            raise ValueError("layers must be 1 or 2")
        if self.layers == 2 and not (self.h is not None and self.h > 0):
            raise ValueError("a bilayer needs a positive separation h")
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be positive")
        if self.a_ho is not None and not self.a_ho > 0:
            raise ValueError("a_ho must be positive")

    @property
    def area(self):
        return self.a * self.a

    @property
    def eta(self):
        return self.a_ho if self.a_ho is not None else DEFAULT_ETA_FRACTION * self.a

    def with_height(self, h):
        return replace(self, h=h)


@dataclass
class LatticeGSum:
    """Result of a lattice Green's-tensor sum with diagnostics."""

    g_tilde: np.ndarray
    terms_used: int
    shells_used: int
    truncation_error_estimate: float
    method: str


# ---------------------------------------------------------------------------
# Index sets
# ---------------------------------------------------------------------------

def _square_indices(m):
    r = np.arange(-m, m + 1)
    mm, nn = np.meshgrid(r, r, indexing="ij")
    return np.stack([mm.ravel(), nn.ravel()], axis=-1)


def _shell_indices(s):
    """Integer pairs with max(|m|, |n|) == s."""
    if s == 0:
        return np.zeros((1, 2), dtype=int)
    r = np.arange(-s, s + 1)
    top = np.stack([r, np.full_like(r, s)], axis=-1)
    bot = np.stack([r, np.full_like(r, -s)], axis=-1)
    r2 = np.arange(-s + 1, s)
    lef = np.stack([np.full_like(r2, -s), r2], axis=-1)
    rig = np.stack([np.full_like(r2, s), r2], axis=-1)
    return np.concatenate([top, bot, lef, rig])


def _disc_indices(radius):
    m = int(math.ceil(radius)) + 1
    idx = _square_indices(m)
    keep = np.hypot(idx[:, 0], idx[:, 1]) <= radius
    return idx[keep]


# ---------------------------------------------------------------------------
# Vectorised kernels: kpts (N, 2) -> (N, 3, 3) complex
# ---------------------------------------------------------------------------

def _site_terms(kpts, sites, z, xi):
    """sum over given site positions of exp(-i k.r) Gs(r + z e_z)."""
    disp = np.concatenate([sites, np.full((len(sites), 1), z)], axis=1)
    gs = free_space_green(disp, xi, scaled=True).reshape(len(sites), 9)
    out = np.zeros((len(kpts), 9), dtype=complex)
    step = max(1, _CHUNK // max(len(sites), 1))
    for i in range(0, len(kpts), step):
        ph = np.exp(-1j * (kpts[i:i + step] @ sites.T))
        out[i:i + step] = ph @ gs
    return out.reshape(-1, 3, 3)


def _recip_terms(kpts, kvecs, z, xi, eta, area):
    """(1/A0) sum_K g_eta(K + k; z)."""
    out = np.zeros((len(kpts), 3, 3), dtype=complex)
    step = max(1, _CHUNK // max(len(kvecs), 1))
    for i in range(0, len(kpts), step):
        p = kpts[i:i + step, None, :] + kvecs[None, :, :]
        out[i:i + step] = weyl_tensor(p, z, xi, eta=eta, scaled=True).sum(axis=1)
    return out / area


def _near_sites(a, z, eta):
    """Sites whose distance to the evaluation point is within the Gaussian's reach."""
    reach = 12.0 * eta
    rad = math.sqrt(max(reach * reach - z * z, 0.0)) / a
    idx = _disc_indices(rad) if rad > 0 else np.zeros((0, 2), dtype=int)
    return idx * a


def _plan(kappa, z, a, eta):
    """Choose the cheapest route and its truncation radius for (kappa, z)."""
    az = abs(z)
    plans = []
    if kappa > 0:
        extent = az + (LOG_TOL + 8.0) / kappa
        radius = math.sqrt(extent * extent - z * z)
        plans.append((math.pi * (radius / a) ** 2, "real", radius))
    if az > 0:
        bcut = kappa + (LOG_TOL + 8.0) / az
        qcut = math.sqrt(bcut * bcut - kappa * kappa)
        plans.append((math.pi * (qcut * a / (2 * math.pi)) ** 2, "poisson", qcut))
    if az < 0.5 * a:
        qcut = math.sqrt(2.0 * (LOG_TOL + 6.0)) / eta
        plans.append((math.pi * ((qcut * a / (2 * math.pi)) ** 2 + (12.0 * eta / a) ** 2), "ewald", qcut))
    return min(plans)


def lattice_tsum(kpts, z, a, xi, eta=None, method="auto"):
    """Batched lattice sum ``T(k; z)`` for an array of in-plane wavevectors.

    Parameters
    ----------
    kpts : array_like, shape (N, 2)
    z : float
        Height of the evaluation point above the plane (m).
    a : float
        Lattice constant (m).
    xi : float
        Imaginary-axis frequency (rad/s), positive.
    eta : float, optional
        Smearing width for the Ewald-type route; default ``a / 3``.
    method : {"auto", "real", "poisson", "ewald"}

    Returns
    -------
    ndarray, complex, shape (N, 3, 3)
    """
    kpts = np.atleast_2d(np.asarray(kpts, dtype=float))
    kappa = xi / C
    eta = DEFAULT_ETA_FRACTION * a if eta is None else eta
    if method == "auto":
        _, method, cut = _plan(kappa, z, a, eta)
    elif method == "real":
        extent = abs(z) + (LOG_TOL + 8.0) / kappa
        cut = math.sqrt(extent * extent - z * z)
    elif method == "poisson":
        bcut = kappa + (LOG_TOL + 8.0) / abs(z)
        cut = math.sqrt(bcut * bcut - kappa * kappa)
    elif method == "ewald":
        cut = math.sqrt(2.0 * (LOG_TOL + 6.0)) / eta
    else:
        raise ValueError(f"unknown method {method!r}")

    if method == "real":
        idx = _disc_indices(cut / a)
        if z == 0.0:
            idx = idx[np.any(idx != 0, axis=1)]
        return _site_terms(kpts, idx * a, z, xi)

    kmax = float(np.max(np.hypot(kpts[:, 0], kpts[:, 1]))) if len(kpts) else 0.0
    kvecs = _disc_indices((cut + kmax) * a / (2 * math.pi)) * (2 * math.pi / a)
    if method == "poisson":
        return _recip_terms(kpts, kvecs, z, xi, 0.0, a * a)

    # smeared reciprocal sum with exact treatment of the near sites
    out = _recip_terms(kpts, kvecs, z, xi, eta, a * a)
    near = _near_sites(a, z, eta)
    disp = np.concatenate([near, np.full((len(near), 1), z)], axis=1)
    smeared = green_smeared(disp, xi, eta).reshape(len(near), 9)
    ph = np.exp(-1j * (kpts @ near.T))
    out -= (ph @ smeared).reshape(-1, 3, 3)
    out *= math.exp(-0.5 * (kappa * eta) ** 2)
    point = np.hypot(near[:, 0], near[:, 1]) > 0 if z == 0.0 else np.ones(len(near), bool)
    if np.any(point):
        out += _site_terms(kpts, near[point], z, xi)
    return out


# ---------------------------------------------------------------------------
# Adaptive single-k sums (public, with diagnostics)
# ---------------------------------------------------------------------------

def _as_kvec(k):
    k = np.asarray(getattr(k, "k_par", k), dtype=float).reshape(2)
    return k


def _layer_offsets(spec, z_offset):
    if spec.layers == 2:
        return [[0.0, -spec.h], [spec.h, 0.0]]
    return None


def _assemble_bilayer(fn, spec):
    t0 = fn(0.0)
    tm = fn(-spec.h)
    tp = fn(spec.h)
    g = np.block([[t0.g_tilde, tm.g_tilde], [tp.g_tilde, t0.g_tilde]])
    return LatticeGSum(g, t0.terms_used + tm.terms_used + tp.terms_used,
                       max(t0.shells_used, tm.shells_used, tp.shells_used),
                       max(t0.truncation_error_estimate, tm.truncation_error_estimate,
                           tp.truncation_error_estimate), t0.method)


def gsum_real_space(spec, k, xi, z_offset=0.0, tol=1e-10, max_shells=200):
    """Direct lattice sum over growing square shells of sites.

    For a bilayer spec the 6x6 block matrix ``[[T(0), T(-h)], [T(h), T(0)]]``
    is returned and ``z_offset`` is ignored.

    Raises
    ------
    ConvergenceError
        If two consecutive shells do not fall below ``tol`` (relative to the
        running sum) within ``max_shells``. Direct sums converge slowly for
        dense lattices (roughly ``a < 0.2 lambda0``); use
        :func:`gsum_poisson` there.
    """
    if xi <= 0 or tol <= 0:
        raise ValueError("gsum_real_space needs xi > 0 and tol > 0")
    if spec.layers == 2:
        return _assemble_bilayer(
            lambda z: gsum_real_space(replace(spec, layers=1, h=None), k, xi, z, tol, max_shells),
            spec)
    kv = _as_kvec(k)[None, :]
    total = np.zeros((3, 3), dtype=complex)
    quiet = 0
    terms = 0
    last = np.inf
    for s in range(0, max_shells + 1):
        idx = _shell_indices(s)
        if z_offset == 0.0:
            idx = idx[np.any(idx != 0, axis=1)]
            if len(idx) == 0:
                continue
        part = _site_terms(kv, idx * spec.a, z_offset, xi)[0]
        total += part
        terms += len(idx)
        scale = np.max(np.abs(total))
        last = np.max(np.abs(part)) / scale if scale > 0 else 0.0
        quiet = quiet + 1 if last < tol else 0
        if quiet >= 2:
            return LatticeGSum(total, terms, s, last, "real")
    raise ConvergenceError(
        f"direct lattice sum not converged after {max_shells} shells "
        f"(last relative shell contribution {last:.3e}); direct summation is "
        "only practical for a > 0.2 lambda0, use gsum_poisson")


def gsum_poisson(spec, k, xi, z_offset=0.0, a_ho=None, tol=1e-10, max_shells=200,
                 site_correction=True):
    """Reciprocal-space (Poisson) lattice sum.

    Parameters
    ----------
    spec : LatticeSpec
    k : array_like or KPoint
        In-plane Bloch wavevector.
    xi : float
        Imaginary-axis frequency (rad/s).
    z_offset : float
        Height of the evaluation point; 0 excludes the coincident site.
    a_ho : float, optional
        Gaussian width. Required in spirit at ``z = 0`` (default
        ``spec.eta``); for ``|z| >= a/2`` the bare components are used unless
        ``a_ho`` is given explicitly.
    tol : float
        Relative per-shell stopping tolerance.
    site_correction : bool
        At ``z = 0``, False returns the plain regularised expression
        ``(1/A0) sum_K g*(K + k) - G*(0)`` whose value depends weakly on
        ``a_ho``; True (default) removes that dependence.
    """
    if xi <= 0 or tol <= 0:
        raise ValueError("gsum_poisson needs xi > 0 and tol > 0")
    if spec.layers == 2:
        return _assemble_bilayer(
            lambda z: gsum_poisson(replace(spec, layers=1, h=None), k, xi, z, a_ho, tol,
                                   max_shells, site_correction), spec)
    a = spec.a
    kv = _as_kvec(k)[None, :]
    smeared = (z_offset == 0.0) or (a_ho is not None) or abs(z_offset) < 0.5 * a
    eta = (a_ho if a_ho is not None else spec.eta) if smeared else 0.0
    # The smeared total is dominated by the ~1/eta^3 self term that the site
    # correction later removes, so a tolerance relative to the running total
    # is not enough: the Gaussian factor must also have decayed.
    min_shells = 0
    if smeared:
        qcut = math.sqrt(2.0 * (LOG_TOL + 6.0)) / eta + float(np.hypot(*kv[0]))
        min_shells = int(math.ceil(qcut * a / (2 * math.pi)))
    total = np.zeros((3, 3), dtype=complex)
    quiet = 0
    terms = 0
    last = np.inf
    for s in range(0, max_shells + 1):
        kvecs = _shell_indices(s) * (2 * math.pi / a)
        part = _recip_terms(kv, kvecs, z_offset, xi, eta, a * a)[0]
        total += part
        terms += len(kvecs)
        scale = np.max(np.abs(total))
        last = np.max(np.abs(part)) / scale if scale > 0 else 0.0
        quiet = quiet + 1 if last < tol else 0
        if quiet >= 2 and s >= min_shells:
            break
    else:
        raise ConvergenceError(
            f"reciprocal sum not converged after {max_shells} shells "
            f"(last relative shell contribution {last:.3e})")
    method = "poisson"
    if smeared:
        kappa = xi / C
        near = _near_sites(a, z_offset, eta)
        disp = np.concatenate([near, np.full((len(near), 1), z_offset)], axis=1)
        ph = np.exp(-1j * (near @ kv[0]))
        sm = np.einsum("n,nij->ij", ph, green_smeared(disp, xi, eta))
        if site_correction:
            total = math.exp(-0.5 * (kappa * eta) ** 2) * (total - sm)
            point = (np.hypot(near[:, 0], near[:, 1]) > 0) if z_offset == 0.0 else np.ones(len(near), bool)
            if np.any(point):
                total = total + _site_terms(kv, near[point], z_offset, xi)[0]
            method = "ewald"
        else:
            if z_offset != 0.0:
                raise ValueError("site_correction=False is only defined at z = 0")
            total = total - green_smeared(np.zeros(3), xi, eta)
            method = "regularized"
    return LatticeGSum(total, terms, s, last, method)


# ---------------------------------------------------------------------------
# k-space polarisation equations
# ---------------------------------------------------------------------------

def system_matrix(spec, k, xi, method="auto"):
    """``I - s g(k)``: 3x3 for a monolayer, 6x6 for a bilayer."""
    s = coupling_strength(spec.species, xi)
    kv = _as_kvec(k)[None, :]
    t0 = lattice_tsum(kv, 0.0, spec.a, xi, spec.eta, method)[0]
    if spec.layers == 1:
        return np.eye(3) - s * t0
    tm = lattice_tsum(kv, -spec.h, spec.a, xi, spec.eta, method)[0]
    tp = lattice_tsum(kv, spec.h, spec.a, xi, spec.eta, method)[0]
    return np.eye(6) - s * np.block([[t0, tm], [tp, t0]])


def solve_kspace(spec, k, xi, p0_direction):
    """Bloch amplitudes ``p(k)`` generated by one source atom at the origin.

    The source's transform is the constant vector ``p0`` (in layer 1 for a
    bilayer). Returns a 3-vector (monolayer) or 6-vector (both layers).
    """
    u = np.asarray(p0_direction, dtype=float)
    m = system_matrix(spec, k, xi)
    rhs = np.zeros(m.shape[0], dtype=complex)
    rhs[:3] = u
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError(
            f"k-space system singular at xi={xi:.6e} rad/s, k={_as_kvec(k)}, a={spec.a:.6e} m")
    return np.linalg.solve(m, rhs)


# ---------------------------------------------------------------------------
# Brillouin-zone quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BZGrid:
    """Graded Gauss-Legendre quadrature over the first Brillouin zone.

    The positive quadrant is split into squares that halve in size towards
    the zone centre (three squares per level), each carrying an ``n x n``
    Gauss-Legendre rule. The number of levels follows the smallest momentum
    scale of the integrand unless fixed by ``levels``.

    ``symmetry`` selects the integration domain: ``"full"`` (whole zone),
    ``"quadrant"`` (uses the reflection symmetries) or ``"wedge"``
    (additionally the diagonal mirror). Reduced domains are valid for the
    diagonal of point-group-invariant matrix integrands.
    """

    n: int = 8
    levels: int = None
    symmetry: str = "wedge"
    grading: float = 0.25
    max_levels: int = 48

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("BZGrid.n must be at least 2")
        if self.symmetry not in ("full", "quadrant", "wedge"):
            raise ValueError("symmetry must be 'full', 'quadrant' or 'wedge'")


def _level_count(grid, a, scale):
    if grid.levels is not None:
        return grid.levels
    top = math.pi / a
    if scale is None or scale <= 0 or scale >= top:
        return 2
    return int(min(grid.max_levels, math.ceil(math.log2(top / (grid.grading * scale))) + 1))


def bz_nodes(a, grid, scale=None, decay=None):
    """Nodes and weights on the first Brillouin zone.

    Weights are normalised so that they sum to the zone area ``(2 pi / a)^2``
    (for reduced domains, after the symmetry multiplicities). ``decay`` may be
    a ``(kappa, h)`` pair: cells on which ``exp(-2 h (beta - kappa))`` is
    negligible for every reciprocal vector are dropped.
    """
    x, w = leggauss(grid.n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    top = math.pi / a
    nlev = _level_count(grid, a, scale)
    cells = []
    size = top
    for _ in range(nlev):
        half = 0.5 * size
        cells.append((half, 0.0, half, "off"))
        cells.append((half, half, half, "diag"))
        if grid.symmetry != "wedge":
            cells.append((0.0, half, half, "off"))
        size = half
    cells.append((0.0, 0.0, size, "diag"))

    pts = []
    wts = []
    gx, gy = np.meshgrid(x, x, indexing="ij")
    gw = np.outer(w, w)
    for x0, y0, side, kind in cells:
        if decay is not None:
            kappa, h = decay
            kmin = math.hypot(x0, y0)
            bmin = math.sqrt(kappa * kappa + min(kmin, top) ** 2)
            if 2.0 * h * (bmin - kappa) > 40.0:
                continue
        px = x0 + side * gx
        py = y0 + side * gy
        ww = gw * side * side
        if grid.symmetry == "wedge":
            if kind == "off":
                ww = 2.0 * ww
            else:
                i, j = np.indices(gx.shape)
                ww = np.where(i > j, 2.0 * ww, np.where(i == j, ww, 0.0))
        keep = ww.ravel() > 0
        pts.append(np.stack([px.ravel(), py.ravel()], axis=-1)[keep])
        wts.append(ww.ravel()[keep])
    pts = np.concatenate(pts) if pts else np.zeros((0, 2))
    wts = np.concatenate(wts) if wts else np.zeros(0)
    wts = 4.0 * wts
    if grid.symmetry == "full":
        signs = np.array([[1, 1], [-1, 1], [1, -1], [-1, -1]], dtype=float)
        pts = np.concatenate([pts * sgn for sgn in signs])
        wts = np.concatenate([wts * 0.25] * 4)
    return pts, wts


def _reduce(values, weights, grid, area):
    """A0 * int d^2k / (2 pi)^2 of a batch of 3x3 matrices, symmetry-folded."""
    tot = np.einsum("n,nij->ij", weights, values) * area / (4.0 * math.pi**2)
    if grid.symmetry == "full":
        return tot
    d = np.diagonal(tot).copy()
    if grid.symmetry == "wedge":
        d[0] = d[1] = 0.5 * (d[0] + d[1])
    return np.diag(d)


def bz_quadrature(func, a, grid=BZGrid(), scale=None):
    """``A0 int_BZ d^2k / (2 pi)^2 func(k)`` for a vectorised ``func``.

    ``func`` maps an (N, 2) array to N values (or N matrices).
    """
    pts, wts = bz_nodes(a, grid, scale)
    vals = np.asarray(func(pts))
    return np.tensordot(wts, vals, axes=(0, 0)) * a * a / (4.0 * math.pi**2)


def _batched_inv(m):
    return np.linalg.inv(m)


def _intralayer_kernel(s, t0):
    x = s * t0
    a_inv = _batched_inv(np.eye(3) - x)
    return x @ x @ a_inv, a_inv


def _scale_for(spec, kappa):
    """Smallest momentum scale the BZ grading has to resolve.

    With a height ``h`` the integrand is damped by ``exp(-2 h |k|)``; the
    region ``|k| < 0.03 / h`` carries a negligible share of it, so light-cone
    structure below that scale does not need extra refinement levels.
    """
    if spec.h is None:
        return kappa
    return max(min(kappa, 1.0 / spec.h), 0.03 / spec.h)


def response_matrix(spec, xi, grid=BZGrid(), method="auto"):
    """Induced-polarisation response ``D`` at the reference atom, ``dp = D p0``.

    Covers the three lattice configurations:

    * monolayer, ``h is None``: the reference atom is the site at the origin;
    * monolayer with ``h``: a probe atom at height ``h`` above site (0, 0);
    * bilayer: the reference atom is the origin site of layer 1; only the
      ``h``-dependent (inter-layer) part is returned when ``interlayer_only``.

    Returns
    -------
    (D, parts) : (ndarray (3, 3), dict)
        ``parts`` holds the separate intra- and inter-layer contributions.
    """
    kappa = xi / C
    s = coupling_strength(spec.species, xi)
    a = spec.a
    eta = spec.eta
    parts = {}
    if spec.layers == 1 and spec.h is None:
        pts, wts = bz_nodes(a, grid, _scale_for(spec, kappa))
        t0 = lattice_tsum(pts, 0.0, a, xi, eta, method)
        val, _ = _intralayer_kernel(s, t0)
        parts["intra"] = _reduce(val, wts, grid, spec.area)
        return parts["intra"], parts

    h = spec.h
    pts, wts = bz_nodes(a, grid, _scale_for(spec, kappa), decay=(kappa, h))
    eye = np.eye(3)
    if len(pts) == 0:
        zero = np.zeros((3, 3))
        return zero, {"inter": zero}
    t0 = lattice_tsum(pts, 0.0, a, xi, eta, method)
    tm = lattice_tsum(pts, -h, a, xi, eta, method)
    a_inv = _batched_inv(eye - s * t0)
    if spec.layers == 1:
        q = np.conj(np.swapaxes(tm, 1, 2)) @ a_inv @ tm
        qint = s * s * _reduce(q, wts, grid, spec.area)
        resp = np.linalg.solve(eye - qint, qint)
        parts["inter"] = resp
        return resp, parts
    tp = np.conj(tm)
    w = s * s * (tm @ a_inv @ tp)
    delta = np.linalg.solve(eye - s * t0 - w, w @ a_inv)
    parts["inter"] = _reduce(delta, wts, grid, spec.area)
    return parts["inter"], parts


def bz_integrate(spec, xi, p0_direction=(0.0, 0.0, 1.0), grid=BZGrid(n=16), refine=True):
    """Induced dipole ``dp`` at the reference atom by Brillouin-zone quadrature.

    For a bilayer both the intra-layer and inter-layer contributions are
    included. With ``refine`` the quadrature is repeated on a grid with twice
    as many nodes per axis and the relative change is reported.

    Returns
    -------
    (dp, estimate) : (ndarray (3,), float)
    """
    if grid.n < 8:
        raise ValueError("bz_integrate needs at least 8 nodes per axis")
    u = np.asarray(p0_direction, dtype=float)

    def total(g):
        if spec.layers == 2:
            intra, _ = response_matrix(replace(spec, layers=1, h=None), xi, g)
            inter, _ = response_matrix(spec, xi, g)
            d = intra + inter
        else:
            d, _ = response_matrix(spec, xi, g)
        return np.real(d @ u)

    dp = total(grid)
    est = float("nan")
    if refine:
        dp2 = total(replace(grid, n=2 * grid.n))
        est = float(np.max(np.abs(dp2 - dp)) / max(np.max(np.abs(dp2)), 1e-300))
        dp = dp2
    return dp, est
