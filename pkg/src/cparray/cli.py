"""Command-line interface: ``cparray <subcommand> [options]``.

Configuration is a flat ``key = value`` text file (``#`` starts a comment)
given with ``--config``; ``--set key=value`` and the dedicated flags override
it. Every CSV is written next to a JSON sidecar holding the resolved
configuration and the package version, from which the run can be repeated.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 partial results (some curves failed).
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
import json
import math
import os
import sys
from functools import partial

import numpy as np

from . import __version__
from .analysis import classify_regime, fit_exponent, regime_grid
from .atoms import get_species
from .casimir import (NodeSolveError, asymptotic_constants, atom_above_patch,
                      born_potential, cp_force, cp_potential, integrate_polarizability,
                      lattice_sum_S, lorentzian_integral, make_frequency_grid, plate_reference,
                      two_atoms)
from .experiment import (TrapConfig, cp_curvature, disorder_monte_carlo,
                         effective_trap_frequency, force_from_curvature, jitter,
                         omega_from_frequency, patch_site_keys, resonance_sweep)
from .greens import free_space_green, weyl_tensor
from .lattice import BZGrid, ConvergenceError, LatticeSpec
from .scattering import FiniteSystem, load_positions

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4
THREADS_ENV = "CPARRAY_THREADS"
GEOMETRIES = ("two_atoms", "monolayer", "bilayer", "patch", "finite")
UNITS = ("lambda0", "a", "m")
EXPERIMENT_HEIGHTS = (6e-6, 7e-6, 8e-6)
EXPERIMENT_LATTICE = 6000e-9


class ConfigError(ValueError):
    """Invalid configuration; ``keys`` lists every offending key."""

    def __init__(self, problems):
        self.problems = dict(problems)
        super().__init__("; ".join(f"{k}: {v}" for k, v in self.problems.items()))

    @property
    def keys(self):
        return sorted(self.problems)


@dataclass(frozen=True)
class RunConfig:
    """Every setting a run depends on (all lengths in metres unless noted)."""

    subcommand: str = "force"
    species: str = "rb87_d2"
    d0: float = None
    gamma: float = None
    geometry: str = "two_atoms"
    a: float = None
    a_over_lambda0: float = None
    positions_file: str = None
    patch_n: int = 21
    h_min: float = 0.01
    h_max: float = 0.05
    n_h: int = 5
    h_unit: str = "lambda0"
    h_values: str = None
    n_nodes: int = 128
    cutoff: float = None
    bz_n: int = 8
    tol: float = 1e-10
    output: str = "cparray_out"
    seed: int = 0
    threads: int = 1
    full: bool = False
    trap_frequency: float = 500e3
    trap_convention: str = "cycles"
    epsilon: float = 0.01
    temperature: float = 1e-6
    damping: float = None
    n_omega: int = 41
    omega_span: float = 0.01
    disorder: bool = False
    n_samples: int = 100
    sigma: float = None
    regime_threshold: float = 5.0

    # -- parsing ----------------------------------------------------------
    @classmethod
    def field_types(cls):
        hints = {"subcommand": str, "species": str, "geometry": str, "positions_file": str,
                 "h_unit": str, "h_values": str, "output": str, "trap_convention": str,
                 "patch_n": int, "n_h": int, "n_nodes": int, "bz_n": int, "seed": int,
                 "threads": int, "n_omega": int, "n_samples": int,
                 "full": bool, "disorder": bool}
        return {f.name: hints.get(f.name, float) for f in fields(cls)}

    @classmethod
    def from_mapping(cls, mapping):
        types = cls.field_types()
        problems = {}
        values = {}
        for key, raw in mapping.items():
            if key not in types:
                problems[key] = "unknown key"
                continue
            try:
                values[key] = _convert(raw, types[key])
            except ValueError as exc:
                problems[key] = str(exc)
        if problems:
            raise ConfigError(problems)
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self):
        p = {}
        if self.subcommand not in SUBCOMMANDS:
            p["subcommand"] = f"must be one of {sorted(SUBCOMMANDS)}"
        if self.species not in ("rb87_d2", "rydberg_53d", "rydberg_70d"):
            p["species"] = "must be rb87_d2, rydberg_53d or rydberg_70d"
        if self.species == "rydberg_70d" and self.d0 is None:
            p["d0"] = "rydberg_70d needs an explicit transition dipole moment (C m)"
        if self.subcommand == "experiment" and self.d0 is None:
            p["d0"] = "experiment needs the transition dipole moment d0 (C m) of the probe species"
        if self.d0 is not None and not self.d0 > 0:
            p["d0"] = "must be positive"
        if self.gamma is not None and not self.gamma >= 0:
            p["gamma"] = "must be non-negative"
        if self.geometry not in GEOMETRIES:
            p["geometry"] = f"must be one of {list(GEOMETRIES)}"
        if self.geometry in ("monolayer", "bilayer", "patch") and self.subcommand in ("potential", "force"):
            if self.a is None and self.a_over_lambda0 is None:
                p["a"] = "lattice geometries need a or a_over_lambda0"
        if self.a is not None and not self.a > 0:
            p["a"] = "must be positive"
        if self.a_over_lambda0 is not None and not self.a_over_lambda0 > 0:
            p["a_over_lambda0"] = "must be positive"
        if self.geometry == "finite" and self.subcommand in ("potential", "force"):
            if not self.positions_file:
                p["positions_file"] = "finite geometry needs a positions file"
            elif not os.path.isfile(self.positions_file):
                p["positions_file"] = f"no such file: {self.positions_file}"
        if self.patch_n < 1:
            p["patch_n"] = "must be positive"
        if self.h_unit not in UNITS:
            p["h_unit"] = f"must be one of {list(UNITS)}"
        if self.h_values is None:
            if not (self.h_min > 0 and self.h_max > self.h_min):
                p["h_min"] = "need 0 < h_min < h_max"
            if self.n_h < 3 and self.subcommand in ("force", "figure2"):
                p["n_h"] = "force sweeps need at least 3 points"
            if self.n_h < 1:
                p["n_h"] = "must be positive"
        else:
            try:
                hv = _parse_list(self.h_values)
                if not hv or any(x <= 0 for x in hv) or any(np.diff(hv) <= 0):
                    p["h_values"] = "must be positive and strictly ascending"
            except ValueError:
                p["h_values"] = "must be a comma separated list of numbers"
        if self.n_nodes < 16:
            p["n_nodes"] = "must be at least 16"
        if self.cutoff is not None and not self.cutoff > 0:
            p["cutoff"] = "must be positive"
        if self.bz_n < 2:
            p["bz_n"] = "must be at least 2"
        if not self.tol > 0:
            p["tol"] = "must be positive"
        if self.threads < 1:
            p["threads"] = "must be at least 1"
        if self.trap_convention not in ("cycles", "angular"):
            p["trap_convention"] = "must be cycles or angular"
        if not self.trap_frequency > 0:
            p["trap_frequency"] = "must be positive"
        if not 0 <= self.epsilon < 1:
            p["epsilon"] = "must lie in [0, 1)"
        if not self.temperature >= 0:
            p["temperature"] = "must be non-negative"
        if self.damping is not None and not self.damping > 0:
            p["damping"] = "must be positive"
        if self.n_omega < 3:
            p["n_omega"] = "must be at least 3"
        if not self.omega_span > 0:
            p["omega_span"] = "must be positive"
        if self.n_samples < 2:
            p["n_samples"] = "must be at least 2"
        if self.sigma is not None and not self.sigma >= 0:
            p["sigma"] = "must be non-negative"
        if not self.regime_threshold > 1:
            p["regime_threshold"] = "must exceed 1"
        if p:
            raise ConfigError(p)

    # -- derived objects --------------------------------------------------
    def make_species(self):
        return get_species(self.species, d0=self.d0, gamma=self.gamma)

    def lattice_constant(self, species):
        if self.a is not None:
            return self.a
        if self.a_over_lambda0 is not None:
            return self.a_over_lambda0 * species.lambda0
        return None

    def heights(self, species):
        if self.h_values is not None:
            raw = np.array(_parse_list(self.h_values))
        else:
            raw = np.geomspace(self.h_min, self.h_max, self.n_h)
        unit = {"m": 1.0, "lambda0": species.lambda0}.get(self.h_unit)
        if unit is None:
            unit = self.lattice_constant(species)
            if unit is None:
                raise ConfigError({"h_unit": "h_unit = a needs a lattice constant"})
        return raw * unit

    def frequency_grid(self, species):
        return make_frequency_grid(species, self.n_nodes, self.cutoff)

    def bz_grid(self):
        return BZGrid(n=self.bz_n)

    def template(self, species):
        a = self.lattice_constant(species)
        if self.geometry == "two_atoms":
            return partial(two_atoms, species)
        if self.geometry == "monolayer":
            return LatticeSpec(a, species, layers=1, h=1.0)
        if self.geometry == "bilayer":
            return LatticeSpec(a, species, layers=2, h=1.0)
        if self.geometry == "patch":
            return partial(atom_above_patch, species, a, self.patch_n)
        base = load_positions(self.positions_file)

        def finite(h):
            return FiniteSystem(np.concatenate([[[0.0, 0.0, h]], base]), species, 0)
        return finite

    def trap(self):
        return TrapConfig(omega_trap=omega_from_frequency(self.trap_frequency, self.trap_convention),
                          epsilon=self.epsilon, damping=self.damping,
                          temperature=self.temperature)


def _convert(raw, typ):
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("none", "")):
        return None
    if isinstance(raw, typ) and not (typ is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    if typ is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if typ is int:
        try:
            return int(text)
        except ValueError:
            raise ValueError(f"not an integer: {text!r}") from None
    if typ is float:
        try:
            return float(text)
        except ValueError:
            raise ValueError(f"not a number: {text!r}") from None
    return text


def _parse_list(text):
    return [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]


def read_config_file(path):
    """Parse a ``key = value`` file into a dict of raw strings."""
    out = {}
    problems = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                problems[f"line {lineno}"] = f"expected key = value, got {line!r}"
                continue
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    if problems:
        raise ConfigError(problems)
    return out


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.16e}"


def write_csv(path, header, rows):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_sidecar(csv_path, cfg, extra=None):
    """JSON sidecar with the full configuration; no timestamps (deterministic)."""
    payload = {"config": asdict(cfg), "version": __version__, "file": os.path.basename(csv_path)}
    if extra:
        payload["details"] = extra
    with open(csv_path + ".json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return str(obj)


def _emit(path, header, rows, cfg, extra=None):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    write_csv(path, header, rows)
    write_sidecar(path, cfg, extra)
    print(path)


def _out(cfg, suffix):
    return f"{cfg.output}_{suffix}.csv"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_potential(cfg, mapper=map):
    sp = cfg.make_species()
    grid = cfg.frequency_grid(sp)
    tmpl = cfg.template(sp)
    from .casimir import system_at
    hs = cfg.heights(sp)
    bz = cfg.bz_grid()
    U = list(mapper(lambda h: cp_potential(system_at(tmpl, h), grid, bz), hs))
    _emit(_out(cfg, "potential"), ["h_m", "h_over_lambda0", "U_J"],
          [(h, h / sp.lambda0, u) for h, u in zip(hs, U)], cfg)
    return EXIT_OK


def cmd_force(cfg, mapper=map):
    sp = cfg.make_species()
    grid = cfg.frequency_grid(sp)
    res = cp_force(cfg.heights(sp), cfg.template(sp), grid, cfg.bz_grid(), mapper=mapper)
    path = _out(cfg, "force")
    _emit(path, ["h_m", "h_over_lambda0", "U_J", "F_N", "local_exponent", "conv_estimate"],
          list(res.rows()), cfg, {"flagged": res.flags.tolist(), **res.metadata})
    return EXIT_OK


def _figure2_curves(cfg):
    rb = get_species("rb87_d2", gamma=cfg.gamma)
    lam = rb.lambda0
    n = cfg.n_h
    curves = [("atom_atom", rb, partial(two_atoms, rb), np.geomspace(0.01, 100.0, n) * lam)]
    fracs = (0.1, 0.3, 0.5, 0.9) if cfg.full else (0.3, 0.5, 0.9)
    for f in fracs:
        a = f * lam
        curves.append((f"bilayer_a{f:g}", rb, LatticeSpec(a, rb, layers=2, h=a),
                       np.geomspace(0.01 * a, 100.0 * lam, n)))
    ryd = get_species("rydberg_53d", gamma=cfg.gamma)
    a = 7000e-9
    curves.append(("rydberg_inset", ryd, LatticeSpec(a, ryd, layers=2, h=a),
                   np.geomspace(0.1 * a, 0.05 * ryd.lambda0, n)))
    return curves


def cmd_figure2(cfg, mapper=map):
    failures = {}
    header = ["h_m", "h_over_lambda0", "U_J", "F_N", "local_exponent", "conv_estimate"]
    for name, sp, tmpl, hs in _figure2_curves(cfg):
        try:
            grid = make_frequency_grid(sp, cfg.n_nodes, cfg.cutoff)
            res = cp_force(hs, tmpl, grid, cfg.bz_grid(), mapper=mapper)
            _emit(_out(cfg, f"fig2a_{name}"), header, list(res.rows()), cfg,
                  {"curve": name, "flagged": res.flags.tolist()})
        except (NodeSolveError, ConvergenceError, np.linalg.LinAlgError, ArithmeticError) as exc:
            failures[name] = f"{type(exc).__name__}: {exc}"
            print(f"curve {name} failed: {exc}", file=sys.stderr)
    rb = get_species("rb87_d2")
    hp = np.geomspace(0.01, 100.0, cfg.n_h) * rb.lambda0
    _emit(_out(cfg, "fig2a_plates"), ["h_m", "h_over_lambda0", "pressure_Pa"],
          [(h, h / rb.lambda0, plate_reference(h)) for h in hp], cfg,
          {"note": "ideal-conductor pressure, not rescaled"})
    _write_regimes(cfg, _out(cfg, "fig2b_regimes"))
    if failures:
        print(json.dumps({"error": "PartialResults", "failed": failures}, sort_keys=True),
              file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _write_regimes(cfg, path):
    grid = regime_grid(np.geomspace(1e-3, 1e3, 61), np.geomspace(1e-4, 10.0, 51),
                       cfg.regime_threshold)
    rows = []
    for i, x in enumerate(grid.h_over_lambda0):
        for j, y in enumerate(grid.a_over_lambda0):
            lab = grid.labels[i][j]
            rows.append((x, y, lab.value, lab.exponent))
    _emit(path, ["h_over_lambda0", "a_over_lambda0", "regime", "nominal_exponent"], rows, cfg)


def cmd_regimes(cfg, mapper=map):
    _write_regimes(cfg, _out(cfg, "regimes"))
    return EXIT_OK


def _emit_scan(scan, path, omega0, cfg, extra):
    scan.to_csv(path, omega0)
    write_sidecar(path, cfg, extra)
    print(path)


def cmd_experiment(cfg, mapper=map):
    sp = cfg.make_species()
    a = cfg.lattice_constant(sp)
    if a is None:
        a = EXPERIMENT_LATTICE
    trap = cfg.trap()
    w0 = trap.omega_trap
    hs = cfg.heights(sp) if cfg.h_values else np.array(EXPERIMENT_HEIGHTS)
    grid = cfg.frequency_grid(sp)
    spec = LatticeSpec(a, sp, layers=1, h=hs[0])
    rows = []
    curv = []
    for h in hs:
        c = cp_curvature(h, spec, grid, bz_grid=cfg.bz_grid())
        curv.append(c.value)
    curv = np.array(curv)
    slope = fit_exponent(hs, curv) if len(hs) > 1 else -6.0
    for h, c in zip(hs, curv):
        weff = effective_trap_frequency(trap, c).exact
        Om = 2.0 * weff * (1.0 + cfg.omega_span * np.linspace(-1.0, 1.0, cfg.n_omega))
        scan = resonance_sweep(trap, weff, Om, mapper)
        _emit_scan(scan, _out(cfg, f"resonance_h{h * 1e9:.0f}nm"), w0, cfg, {"h_m": h})
        shift_hz = (scan.peak_Omega / 2.0 - w0) / (2.0 * math.pi)
        c_meas = trap.mass * ((scan.peak_Omega / 2.0) ** 2 - w0 * w0)
        rows.append((h, shift_hz, force_from_curvature(h, c_meas, slope), c))
    control = resonance_sweep(replace(trap, epsilon=0.0), w0,
                              2.0 * w0 * (1.0 + cfg.omega_span * np.linspace(-1, 1, cfg.n_omega)), mapper)
    _emit_scan(control, _out(cfg, "resonance_control_eps0"), w0, cfg, {"epsilon": 0.0})
    extra = {"curvature_exponent": slope,
             "force_note": "force inferred assuming a local power law for the curvature"}
    if cfg.disorder:
        j = jitter(trap)
        sigma = cfg.sigma if cfg.sigma is not None else j.sigma_total
        n = 15
        sysf = atom_above_patch(sp, a, n, hs[0])
        st = disorder_monte_carlo(sysf, sigma, cfg.n_samples, grid, cfg.seed,
                                  patch_site_keys(n), mapper=mapper)
        extra["disorder"] = {"sigma_m": sigma, "relative_spread": st.relative_spread,
                             "mean_force_N": st.mean, "std_N": st.std, "seed": st.seed,
                             "h_m": hs[0], "patch": n}
        print(f"disorder relative force spread: {st.relative_spread:.4%}")
    _emit(_out(cfg, "peak_shifts"), ["h_m", "peak_shift_Hz", "inferred_force_N", "curvature_J_m2"],
          rows, cfg, extra)
    return EXIT_OK


def _check_items():
    """Fast oracle checks: (name, passed, detail)."""
    out = []
    c = asymptotic_constants()
    out.append(("retarded constant = 1/10", abs(c.retarded - 0.1) < 1e-6, f"{c.retarded:.12g}"))
    out.append(("polar constant = pi/2", abs(c.nonretarded - math.pi / 2) < 1e-9, f"{c.nonretarded:.15g}"))
    s = lattice_sum_S(10.0, 1.0) * 1e4 / (math.pi / 2)
    out.append(("S a^2 h^4 -> pi/2 at h = 10a", abs(s - 1) < 0.01, f"{s:.6f}"))
    s = lattice_sum_S(0.01, 1.0) * 1e-12
    out.append(("S h^6 -> 1 at h = 0.01a", abs(s - 1) < 1e-4, f"{s:.8f}"))
    rb = get_species("rb87_d2")
    rb0 = replace(rb, gamma=0.0)
    g = make_frequency_grid(rb0, 128)
    q = integrate_polarizability(rb0, g) / lorentzian_integral(rb0, g.cutoff) - 1
    out.append(("Lorentzian quadrature", abs(q) < 1e-8, f"{q:.2e}"))
    xi = rb.omega0
    r = np.array([0.2, -0.1, 0.3]) * rb.lambda0
    p = np.array([[0.0, 0.0]])
    gs = free_space_green(r, xi, scaled=True)
    out.append(("Green tensor symmetric", np.allclose(gs, gs.T, rtol=0, atol=1e-12 * abs(gs).max()), ""))
    wt = weyl_tensor(p, 0.3 * rb.lambda0, xi)
    out.append(("Weyl tensor finite", bool(np.all(np.isfinite(wt))), ""))
    g = make_frequency_grid(rb, 64)
    sysf = two_atoms(rb, 5.0 * rb.lambda0)
    ratio = born_potential(sysf, g) / cp_potential(sysf, g)
    out.append(("Born / full two-atom at 5 lambda0", abs(ratio - 1) < 1e-3, f"{ratio - 1:.2e}"))
    lab = classify_regime(50.0, 0.5, 1.0)
    out.append(("regime classifier", lab.value == "collective_retarded", lab.value))
    return out


def cmd_check(cfg, mapper=map):
    items = _check_items()
    ok = True
    for name, passed, detail in items:
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip())
    return EXIT_OK if ok else EXIT_NUMERIC


SUBCOMMANDS = {
    "potential": cmd_potential,
    "force": cmd_force,
    "figure2": cmd_figure2,
    "regimes": cmd_regimes,
    "experiment": cmd_experiment,
    "check": cmd_check,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_FLAG_KEYS = ("species", "d0", "geometry", "a", "a_over_lambda0", "positions_file", "h_min",
              "h_max", "n_h", "h_unit", "h_values", "n_nodes", "cutoff", "bz_n", "output",
              "seed", "threads")


def build_parser():
    parser = argparse.ArgumentParser(prog="cparray", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"cparray {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        for key in _FLAG_KEYS:
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
        p.add_argument("--full", action="store_true", default=None,
                       help="include the expensive a = 0.1 lambda0 curve in figure2")
        p.add_argument("--disorder", action="store_true", default=None,
                       help="run the positional-disorder Monte Carlo in experiment")
    return parser


def resolve_config(args):
    """Merge defaults, config file, ``--set`` and flags (later wins)."""
    raw = {}
    if args.config:
        raw.update(read_config_file(args.config))
    problems = {}
    for item in args.set:
        if "=" not in item:
            problems[item] = "--set expects KEY=VALUE"
            continue
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    if problems:
        raise ConfigError(problems)
    env_threads = os.environ.get(THREADS_ENV)
    if env_threads and "threads" not in raw:
        raw["threads"] = env_threads
    for key in _FLAG_KEYS + ("full", "disorder"):
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    raw["subcommand"] = args.subcommand
    return RunConfig.from_mapping(raw)


def _error(kind, message, **extra):
    print(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        _error("ConfigError", str(exc), keys=exc.keys)
        return EXIT_CONFIG
    except OSError as exc:
        _error("ConfigError", str(exc), keys=["config"])
        return EXIT_CONFIG
    try:
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                return SUBCOMMANDS[cfg.subcommand](cfg, pool.map)
        return SUBCOMMANDS[cfg.subcommand](cfg)
    except ConfigError as exc:
        _error("ConfigError", str(exc), keys=exc.keys)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        _error("ConfigError", str(exc), keys=[])
        return EXIT_CONFIG
    except (NodeSolveError, ConvergenceError, np.linalg.LinAlgError, ArithmeticError) as exc:
        _error(type(exc).__name__, str(exc), xi=getattr(exc, "xi", None))
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
