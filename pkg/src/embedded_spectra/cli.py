"""Command-line front end: JSON experiment config in, CSV tables out.

    embedded-spectra {bands,monodromy,eig,persist,decay} --config CFG [--out DIR]
                     [--threads K] [--seed S]

Exit status: 0 on success, 1 on a numerical failure, 2 on an invalid config.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import _backend
from .decay import fit_eigenfunction, roughness_trials
from .errors import ConfigError, NoLocalMinimum, NumericalError
from .floquet import floquet_decomposition
from .ode import IntegratorConfig
from .persistence import (codimension, persistence_scan, project_to_tangent, random_profile,
                          tangent_data)
from .potentials import (PERTURBATION_CLASSES, free_potential, make_example5,
                         make_perturbation, mathieu_potential, profile, table_potential)
from .spectral import (MatchingConfig, band_scan, eigenfunction, find_embedded_eigenvalue,
                       mismatch_scan, system_at_infinity)

VERSION = "0.1.0"

_POS = {"type": "number", "exclusiveMinimum": 0}
_PROFILE = {
    "oneOf": [
        {"enum": ["sech2", "sech", "tanh_sech2", "gauss", "bump", "zero"]},
        {
            "type": "object",
            "required": ["name"],
            "properties": {
                "name": {"enum": ["sech2", "sech", "tanh_sech2", "gauss", "bump", "zero"]},
                "shift": {"type": "number"},
                "width": _POS,
                "a": {"type": "number"},
                "b": {"type": "number"},
            },
            "additionalProperties": False,
        },
    ]
}

SCHEMA = {
    "type": "object",
    "required": ["potential"],
    "additionalProperties": False,
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "beta": {"type": "number", "exclusiveMinimum": 1},
        "lambda0": {"oneOf": [{"type": "number"}, {"const": "auto"}]},
        "q": {"type": "number"},
        "period": _POS,
        "potential": {
            "oneOf": [
                {"enum": ["example5", "mathieu", "free"]},
                {
                    "type": "object",
                    "required": ["x", "A", "Ap", "period"],
                    "properties": {
                        "x": {"type": "array", "items": {"type": "number"}, "minItems": 4},
                        "A": {"type": "array", "minItems": 4},
                        "Ap": {"type": "array", "minItems": 4},
                        "period": _POS,
                    },
                    "additionalProperties": False,
                },
            ]
        },
        "perturbation": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["class", "profile"],
                    "properties": {
                        "class": {"enum": list(PERTURBATION_CLASSES)},
                        "profile": _PROFILE,
                        "entry": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                  "minItems": 2, "maxItems": 2},
                        "epsilon": {"type": "number"},
                    },
                    "additionalProperties": False,
                },
            ]
        },
        "integrator": {
            "type": "object",
            "properties": {k: _POS for k in ("rel_tol", "abs_tol", "max_step", "renorm_interval")},
            "additionalProperties": False,
        },
        "matching": {
            "type": "object",
            "properties": {
                "T": _POS, "radius": _POS, "tol": _POS, "grid_step": _POS,
                "coarse_points": {"type": "integer", "minimum": 3},
            },
            "additionalProperties": False,
        },
        "bands": {
            "type": "object",
            "properties": {
                "lambda_range": {"type": "array", "items": {"type": "number"},
                                 "minItems": 2, "maxItems": 2},
                "samples": {"type": "integer", "minimum": 2},
                "component": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "persist": {
            "type": "object",
            "properties": {
                "epsilons": {"type": "array", "items": _POS, "minItems": 2},
                "directions": {"type": "array", "minItems": 1, "items": {
                    "enum": ["transversal", "tangent", "diagonal", "config"]}},
            },
            "additionalProperties": False,
        },
        "decay": {
            "type": "object",
            "properties": {
                "trials": {"type": "integer", "minimum": 1},
                "horizon": _POS,
                "dim": {"type": "integer", "minimum": 2, "multipleOf": 2},
                "tol": _POS,
            },
            "additionalProperties": False,
        },
    },
}

_HINTS = {
    ("beta", "exclusiveMinimum"): "beta must be > 1: the X_beta weight (1+|x|)^beta "
                                  "only defines a decaying-perturbation space for beta > 1",
}


# --------------------------------------------------------------- config

def _line_of(text, path):
    """1-based line of the innermost key of ``path`` in the JSON source."""
    pos = 0
    for key in path:
        if isinstance(key, str):
            m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
            if m:
                pos = m.start()
    return text.count("\n", 0, pos) + 1


def load_config(path):
    """Parse and validate a config file; returns (config dict, raw bytes)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    text = raw.decode("utf-8")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = list(e.absolute_path)
        key = (str(where[-1]) if where else "", e.validator)
        msg = _HINTS.get(key, e.message)
        dotted = ".".join(str(p) for p in where) or "<root>"
        raise ConfigError(f"{path}:{_line_of(text, where)}: {dotted}: {msg}")
    return cfg, raw


def _integrator(cfg):
    return IntegratorConfig(**cfg.get("integrator", {}))


def _matching(cfg):
    return MatchingConfig(integrator=_integrator(cfg), **cfg.get("matching", {}))


def _band_setup(cfg):
    """Scalar periodic potential used for the band scan and its period."""
    pot = cfg["potential"]
    if pot in ("example5", "mathieu"):
        q = cfg.get("q", 1.0)
        return (lambda x: 2.0 * q * np.cos(2.0 * x)), np.pi
    if pot == "free":
        return (lambda x: np.zeros_like(x)), cfg.get("period", np.pi)
    c = cfg.get("bands", {}).get("component", 0)
    p = table_potential_from(cfg)
    if c >= p.n:
        raise ConfigError(f"bands.component {c} out of range for n = {p.n}")
    return (lambda x: p.Ap(x)[:, c, c]), p.period


def _lambda_range(cfg):
    lo, hi = cfg.get("bands", {}).get("lambda_range", [-1.0, 4.5])
    if not hi > lo:
        raise ConfigError("bands.lambda_range must be increasing")
    return lo, hi


def resolve_lambda0(cfg, icfg):
    lam0 = cfg.get("lambda0", "auto")
    if lam0 != "auto":
        return float(lam0)
    Vp, period = _band_setup(cfg)
    bands = band_scan(Vp, period, _lambda_range(cfg), cfg.get("bands", {}).get("samples", 201),
                      icfg)
    if not bands.bands:
        raise ConfigError("lambda0 = auto but the band scan found no band in lambda_range")
    return bands.midpoint(0)


def table_potential_from(cfg):
    t = cfg["potential"]
    try:
        x = np.asarray(t["x"], dtype=float)
        A = np.asarray(t["A"], dtype=float)
        Ap = np.asarray(t["Ap"], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"potential tables are not numeric arrays: {exc}") from exc
    if A.ndim != 3 or A.shape[0] != len(x) or A.shape[1] != A.shape[2]:
        raise ConfigError("potential.A must have shape (len(x), n, n)")
    if Ap.ndim != 3 or Ap.shape[1:] != A.shape[1:]:
        raise ConfigError("potential.Ap must have shape (m, n, n) matching A")
    if np.any(np.diff(x) <= 0):
        raise ConfigError("potential.x must be strictly increasing")
    if np.max(np.abs(A - np.swapaxes(A, 1, 2))) > 0 or np.max(np.abs(Ap - np.swapaxes(Ap, 1, 2))) > 0:
        raise ConfigError("potential tables must be symmetric matrices")
    return table_potential(x, A, Ap, float(t["period"]), cfg.get("beta", 2.0))


def build_potential(cfg, lam0):
    beta = cfg.get("beta", 2.0)
    name = cfg["potential"]
    if name == "example5":
        pot = make_example5(lam0, beta).potential
    elif name == "mathieu":
        pot = mathieu_potential(cfg.get("q", 1.0))
    elif name == "free":
        pot = free_potential(cfg.get("period", np.pi))
    else:
        pot = table_potential_from(cfg)
    if "n" in cfg and cfg["n"] != pot.n:
        raise ConfigError(f"n = {cfg['n']} does not match the potential dimension {pot.n}")
    return pot


def _profile_from(item):
    if isinstance(item, str):
        return profile(item)
    params = {k: v for k, v in item.items() if k != "name"}
    return profile(item["name"], **params)


def build_perturbation(cfg, n):
    pcfg = cfg.get("perturbation")
    if pcfg is None:
        return None
    cls = pcfg["class"]
    default_entry = [0, 0] if cls == "diagonal" else [0, 1]
    entry = tuple(pcfg.get("entry", default_entry))
    return make_perturbation(cls, {entry: _profile_from(pcfg["profile"])},
                             epsilon=pcfg.get("epsilon", 1.0), beta=cfg.get("beta", 2.0), n=n)


# ------------------------------------------------------------------ CSV

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.12e" % v
    return str(v)


class Run:
    """Shared state of one CLI invocation: config, output directory, metadata."""

    def __init__(self, command, cfg, raw, out, threads, seed):
        self.command = command
        self.cfg = cfg
        self.out = Path(out)
        self.threads = threads
        self.seed = seed
        self.icfg = _integrator(cfg)
        self.mcfg = _matching(cfg)
        self.meta = [
            ("tool", f"embedded-spectra {VERSION}"),
            ("command", command),
            ("config_sha256", hashlib.sha256(raw).hexdigest()),
            ("backend", _backend.BACKEND),
            ("seed", seed),
            ("rel_tol", self.icfg.rel_tol),
            ("abs_tol", self.icfg.abs_tol),
            ("max_step", self.icfg.max_step),
            ("renorm_interval", self.icfg.renorm_interval),
            ("T", self.mcfg.T),
            ("mismatch_tol", self.mcfg.tol),
            ("beta", cfg.get("beta", 2.0)),
        ]

    def write(self, name, columns, rows, extra_meta=(), footer=()):
        self.out.mkdir(parents=True, exist_ok=True)
        lines = [f"# {k}: {_fmt(v)}" for k, v in list(self.meta) + list(extra_meta)]
        lines.append(",".join(columns))
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
        lines.extend(f"# {k}: {_fmt(v)}" for k, v in footer)
        path = self.out / name
        path.write_text("\n".join(lines) + "\n")
        return path


# ------------------------------------------------------------- commands

def cmd_bands(run: Run):
    Vp, period = _band_setup(run.cfg)
    bands = band_scan(Vp, period, _lambda_range(run.cfg),
                      run.cfg.get("bands", {}).get("samples", 401), run.icfg,
                      threads=run.threads)
    run.write("bands.csv", ["lambda", "discriminant", "in_band"],
              zip(bands.lams, bands.discriminant, bands.in_band),
              extra_meta=[("period", period)])
    run.write("band_edges.csv", ["band", "lower", "upper"],
              [(i, lo, hi) for i, (lo, hi) in enumerate(bands.bands)])
    print(f"{len(bands.bands)} band(s) in [{bands.lams[0]:g}, {bands.lams[-1]:g}]")
    for i, (lo, hi) in enumerate(bands.bands):
        print(f"  band {i}: [{lo:.10f}, {hi:.10f}]")
    return bands


def cmd_monodromy(run: Run):
    lam0 = resolve_lambda0(run.cfg, run.icfg)
    pot = build_potential(run.cfg, lam0)
    fd = floquet_decomposition(system_at_infinity(pot, lam0), run.icfg)
    cd = codimension(fd)
    rows = []
    for i, (mu, om) in enumerate(zip(fd.multipliers, fd.exponents)):
        label = "c" if abs(abs(mu) - 1.0) < 1e-6 else ("s" if abs(mu) < 1 else "u")
        rows.append((i, mu.real, mu.imag, abs(mu), om.real, om.imag, label))
    meta = [("lambda0", lam0), ("center_count", cd.two_m), ("iota_range_codim", cd.iota_range),
            ("det_M", float(np.linalg.det(fd.M))),
            ("periodicity_defect", fd.periodicity_defect)]
    run.write("monodromy.csv", ["index", "mu_re", "mu_im", "mu_abs", "omega_re", "omega_im",
                                "label"], rows, extra_meta=meta)
    print(f"lambda0 = {lam0:.12f}: 2m = {cd.two_m}, matching-range codimension {cd.iota_range}, "
          f"omega_min = {fd.omega_min:.6f}")
    return fd


def _eigen(run: Run, lam0, pot, B):
    mc = run.mcfg
    grid = np.linspace(lam0 - mc.radius, lam0 + mc.radius, mc.coarse_points)
    sig = mismatch_scan(pot, grid, B, mc, threads=run.threads)
    run.write("mismatch.csv", ["lambda", "sigma_min"], zip(grid, sig),
              extra_meta=[("lambda0", lam0)])
    try:
        cand = find_embedded_eigenvalue(pot, lam0, B, mc)
    except NoLocalMinimum:
        return None
    return cand


def cmd_eig(run: Run):
    lam0 = resolve_lambda0(run.cfg, run.icfg)
    pot = build_potential(run.cfg, lam0)
    B = build_perturbation(run.cfg, pot.n)
    cand = _eigen(run, lam0, pot, B)
    cols = ["lambda", "sigma_min", "flagged", "residual", "kappa_left", "kappa_right", "r2",
            "omega_min"]
    if cand is None or not cand.flagged:
        sigma = cand.mismatch if cand is not None else float("nan")
        lam = cand.lam if cand is not None else float("nan")
        run.write("eigen.csv", cols, [(lam, sigma, False, float("nan"), float("nan"),
                                       float("nan"), float("nan"), float("nan"))],
                  extra_meta=[("lambda0", lam0), ("result", "no eigenvalue in interval")])
        print(f"no eigenvalue in [{lam0 - run.mcfg.radius:.6f}, {lam0 + run.mcfg.radius:.6f}]"
              f" (min mismatch {sigma:.3e} >= {run.mcfg.tol:.1e})")
        return cand
    ef = eigenfunction(cand, run.mcfg)
    fit = fit_eigenfunction(ef)
    run.write("eigen.csv", cols, [(cand.lam, cand.mismatch, True, ef.residual, fit.left.rate,
                                   fit.right.rate, fit.r2, fit.omega_min)],
              extra_meta=[("lambda0", lam0), ("result", "eigenvalue")])
    ucols = [f"u{i + 1}" for i in range(pot.n)]
    run.write("eigenfunction.csv", ["x"] + ucols,
              [(x,) + tuple(u) for x, u in zip(ef.xs, ef.u)],
              extra_meta=[("lambda", cand.lam), ("normalization", "unit L2")])
    print(f"eigenvalue {cand.lam:.12f} (shift {cand.lam - lam0:+.3e}), mismatch "
          f"{cand.mismatch:.3e}, residual {ef.residual:.3e}, decay rate {fit.rate:.4f}")
    return cand


def _direction(name, run, pot, lam0, td_cache):
    beta = run.cfg.get("beta", 2.0)
    if name == "diagonal":
        return make_perturbation("diagonal", {0: profile("sech2")}, beta=beta,
                                 n=pot.n).normalized()
    if pot.n < 2:
        raise ConfigError(f"direction {name!r} needs a coupled system (n >= 2)")
    if name == "transversal":
        return make_perturbation("T_beta", {(0, 1): profile("sech2")}, beta=beta,
                                 n=pot.n).normalized()
    if name == "tangent":
        if "td" not in td_cache:
            ef = eigenfunction(find_embedded_eigenvalue(pot, lam0, None, run.mcfg), run.mcfg)
            td_cache["td"] = tangent_data(pot, ef.lam, ef, cfg=run.mcfg)
        rng = np.random.default_rng(run.seed)
        return project_to_tangent(td_cache["td"], random_profile(rng), beta=beta, n=pot.n)
    B = build_perturbation(run.cfg, pot.n)
    if B is None:
        raise ConfigError("direction 'config' needs a perturbation section")
    return B.normalized()


def cmd_persist(run: Run):
    lam0 = resolve_lambda0(run.cfg, run.icfg)
    pot = build_potential(run.cfg, lam0)
    pc = run.cfg.get("persist", {})
    eps = pc.get("epsilons", [0.04, 0.02, 0.01])
    names = pc.get("directions", ["transversal", "tangent", "diagonal"])
    rows, footer, cache = [], [], {}
    for name in names:
        d = _direction(name, run, pot, lam0, cache)
        scan = persistence_scan(pot, lam0, d, eps, run.mcfg, threads=run.threads)
        rows.extend((name, r.epsilon, r.lambda_min, r.sigma_min, r.flagged) for r in scan.rows)
        footer.append((f"fitted_exponent[{name}]", scan.exponent))
        footer.append((f"all_flagged[{name}]", scan.all_flagged))
        print(f"{name}: fitted exponent {scan.exponent:.3f}, "
              f"flagged {sum(r.flagged for r in scan.rows)}/{len(scan.rows)}")
    run.write("persistence.csv", ["direction", "epsilon", "lambda_min", "sigma_min", "flagged"],
              rows, extra_meta=[("lambda0", lam0)], footer=footer)


def cmd_decay(run: Run):
    lam0 = resolve_lambda0(run.cfg, run.icfg)
    pot = build_potential(run.cfg, lam0)
    B = build_perturbation(run.cfg, pot.n)
    dc = run.cfg.get("decay", {})
    cand = find_embedded_eigenvalue(pot, lam0, B, run.mcfg)
    if not cand.flagged:
        raise NumericalError(f"no eigenvalue near {lam0:.6f} (mismatch {cand.mismatch:.3e})")
    ef = eigenfunction(cand, run.mcfg)
    fit = fit_eigenfunction(ef)
    run.write("decay_fit.csv", ["side", "rate", "r2", "omega_min", "within_bound"],
              [(t.side, t.rate, t.r2, fit.omega_min, fit.within_bound())
               for t in (fit.left, fit.right)], extra_meta=[("lambda", cand.lam)])
    trials = roughness_trials(dc.get("trials", 20), run.seed, dc.get("dim", 2),
                              dc.get("horizon", 50.0), dc.get("tol", 1e-2), run.threads, run.icfg)
    run.write("roughness.csv", ["trial", "delta", "measured_rate_s", "bound_s",
                                "measured_rate_u", "bound_u", "pass"],
              [(i, r.delta, r.measured_s, r.bound_s[1], r.measured_u, r.bound_u[0], r.passed)
               for i, r in enumerate(trials)],
              extra_meta=[("K_estimate", "cond(eigenvector matrix) of the base system")])
    npass = sum(r.passed for r in trials)
    print(f"decay rate {fit.rate:.4f} (omega_min {fit.omega_min:.4f}, R^2 {fit.r2:.6f}); "
          f"roughness probes passed {npass}/{len(trials)}")


COMMANDS = {"bands": cmd_bands, "monodromy": cmd_monodromy, "eig": cmd_eig,
            "persist": cmd_persist, "decay": cmd_decay}


def bundled_config(name="example5.json"):
    return resources.files("embedded_spectra") / "data" / name


def _u64(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON experiment config")
    common.add_argument("--out", default=".", help="output directory for CSV files")
    common.add_argument("--threads", type=_positive_int, default=1)
    common.add_argument("--seed", type=_u64, default=0)
    parser = argparse.ArgumentParser(prog="embedded-spectra", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__name__.replace("cmd_", ""))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg, raw = load_config(args.config)
        run = Run(args.command, cfg, raw, args.out, args.threads, args.seed)
        COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
