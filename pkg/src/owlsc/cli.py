"""Command-line driver: ``owlsc {generate, cluster, sweep, validate}``.

Settings come from three layers, later ones winning: built-in defaults, a
flat JSON file given with ``--config``, then ``--set key=value`` pairs (plus
the ``--seed`` and ``--replications`` shortcuts). Progress goes to stderr and
data only to files.

Exit codes: 0 success, 1 property or total solver failure, 2 usage or
configuration error, 3 I/O error.
"""
import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import experiments as ex
from . import validation
from .exceptions import OutputError, OwlscError, ParseError
from .geometry import (
    add_noise,
    generate_b1,
    generate_b2,
    generate_orthogonal,
    NoiseConfig,
    sample_union,
)
from .owl import RampParams
from .pipeline import ExactL1, Lasso, OscConfig, OwlRamp, run_osc
from .solvers import SolverConfig

logger = logging.getLogger("owlsc")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
DEFAULT_SEED = 42
COMMANDS = ("generate", "cluster", "sweep", "validate")
SWEEP_KINDS = ("roc", "error_vs_k", "affinity", "rho", "noise")


class ConfigError(OwlscError, ValueError):
    """Bad configuration; the message names the offending field."""


# generator settings shared by every command that synthesizes data
_DATA = {
    "generator": "b1",  # b1 | b2 | orthogonal
    "L": 3,
    "d": 20,
    "n": 40,
    "rho": 5.0,
    "alpha": 0.5,  # b2 only
    "sigma": 0.0,
}
_SOLVER = {"max_iterations": 2000, "tolerance": 1e-8}
_REG = {
    "method": "owl",  # owl | lasso | exact_l1
    "lam": None,  # default LAMBDA_SCALE / sqrt(d)
    "delta": None,  # default: w_1 = w1_ratio * lam
    "r": None,  # default N / L
    "w1_ratio": ex.W1_RATIO,
}

DEFAULTS = {
    "generate": {"seed": DEFAULT_SEED, **_DATA},
    "cluster": {
        "seed": DEFAULT_SEED,
        **_DATA,
        **_SOLVER,
        **_REG,
        "data": None,
        "labels": None,
        "k": None,  # default N
    },
    "sweep": {
        "seed": DEFAULT_SEED,
        **_DATA,
        **_SOLVER,
        "kind": "error_vs_k",
        "replications": ex.DEFAULT_REPLICATIONS,
        "lam": None,
        "w1_ratio": ex.W1_RATIO,
        "k_grid": None,
        "sigmas": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        "alphas": [0.75, 0.85, 0.95, 1.0],
        "rhos": [2.0, 3.0, 5.0, 8.0],
        "lambdas": list(ex.ROC_LAMBDAS),
        "deltas": list(ex.ROC_DELTAS),
        "n_points": 100,
        "r": None,
    },
    "validate": {
        "seed": 0,
        "suite": None,
        "trials": None,
        "n": None,
        "d": None,
        "delta": None,
        "target_prob": None,
        "r": None,
        "instances": None,
    },
}

@dataclass
class RunSpec:
    command: str
    config_path: str = None
    output_path: str = None
    master_seed: int = DEFAULT_SEED
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")


# -- configuration --------------------------------------------------------

def parse_value(text):
    """Interpret an override value: JSON if possible, else a comma list of
    numbers, else the raw string."""
    try:
        return json.loads(text)
    except ValueError:
        pass
    if "," in text:
        try:
            return [json.loads(p) for p in text.split(",") if p.strip()]
        except ValueError:
            pass
    return text


def parse_overrides(pairs):
    out = {}
    for p in pairs:
        key, sep, val = p.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {p!r} is not of the form key=value")
        out[key.strip()] = parse_value(val.strip())
    return out


def load_config_file(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as err:
        raise OSError(f"config file {path} not found") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path}: invalid JSON ({err.msg} at line {err.lineno})") from err
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path}: top level must be an object")
    for k, v in data.items():
        if isinstance(v, dict):
            raise ConfigError(f"config field {k!r}: nested objects are not allowed (flat schema)")
    return data


def _coerce(key, value, default):
    """Check ``value`` against the type of ``default``."""
    if value is None:
        return None
    kind = type(default)
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind is list:
            if not isinstance(value, list):
                value = [value]
            return [float(v) if isinstance(v, float) else v for v in value]
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"config field {key!r}: expected {kind.__name__}, got {value!r}") from None
    # untyped (default None): accept numbers, strings and lists
    return value


def resolve_config(command, file_cfg=None, overrides=None):
    """Merge defaults < config file < overrides and type-check every field."""
    defaults = DEFAULTS[command]
    merged = dict(defaults)
    for layer in (file_cfg or {}, overrides or {}):
        for k, v in layer.items():
            if k not in defaults:
                raise ConfigError(f"unknown config field {k!r} for command {command!r}")
            merged[k] = v
    return {k: _coerce(k, v, defaults[k]) if defaults[k] is not None else v for k, v in merged.items()}


def _require(cfg, key, kind=float, positive=False, allow_zero=False):
    v = cfg[key]
    if v is None:
        raise ConfigError(f"missing required config field {key!r}")
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"config field {key!r}: expected a number, got {v!r}")
    if positive and not (v > 0 or (allow_zero and v == 0)):
        raise ConfigError(f"config field {key!r} must be {'>= 0' if allow_zero else '> 0'}")
    if kind is int and float(v) != int(v):
        raise ConfigError(f"config field {key!r}: expected an integer, got {v!r}")
    return kind(v)


# -- matrix IO ------------------------------------------------------------

def read_matrix_csv(path):
    """Read points from CSV, one point per ROW, and return an (n, N) matrix
    of unit-norm columns.

    Raises
    ------
    ParseError
        On ragged rows, non-numeric or non-finite cells, or a zero row. The
        message names the (1-based) row.
    """
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise ParseError(f"{path}: row {i}: non-numeric cell {bad!r}") from None
            if rows and len(vals) != len(rows[0][1]):
                raise ParseError(f"{path}: row {i}: expected {len(rows[0][1])} values, found {len(vals)}")
            if not all(math.isfinite(v) for v in vals):
                raise ParseError(f"{path}: row {i}: non-finite value")
            rows.append((i, vals))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    A = np.array([v for _, v in rows], dtype=float)
    norms = np.linalg.norm(A, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ParseError(f"{path}: row {rows[zero[0]][0]}: zero-norm point")
    return (A / norms[:, None]).T


def _is_float(c):
    try:
        float(c)
        return True
    except ValueError:
        return False


def _fmt(x):
    return format(float(x), ".17g")


def write_matrix_csv(path, X):
    """Write column-points as rows, values to 17 significant digits."""
    ex.write_csv_atomic(path, None, ([_fmt(v) for v in col] for col in np.asarray(X).T))


def read_labels_csv(path):
    labels = []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0] and rows[0][0].strip() == "label":
        rows = rows[1:]
    for i, row in enumerate(rows, start=2):
        if not row:
            continue
        try:
            labels.append(int(row[0]))
        except ValueError:
            raise ParseError(f"{path}: row {i}: label {row[0]!r} is not an integer") from None
    return np.asarray(labels, dtype=np.int64)


def _sidecar(path, suffix):
    root, ext = os.path.splitext(path)
    return f"{root}_{suffix}{ext or '.csv'}"


# -- commands -------------------------------------------------------------

def _solver(cfg):
    return SolverConfig(
        max_iterations=_require(cfg, "max_iterations", int, positive=True),
        rel_tolerance=_require(cfg, "tolerance", float, positive=True),
    )


def _generate_union(cfg):
    gen = cfg["generator"]
    seed = cfg["seed"]
    L = _require(cfg, "L", int, positive=True)
    d = _require(cfg, "d", int, positive=True)
    rho = _require(cfg, "rho", float, positive=True)
    if gen == "b1":
        bases = generate_b1(L, d, _require(cfg, "n", int, positive=True), seed=seed)
    elif gen == "orthogonal":
        bases = generate_orthogonal(L, d, seed=seed)
    elif gen == "b2":
        alpha = _require(cfg, "alpha", float, positive=True, allow_zero=True)
        bases = generate_b2(d, target_affinity=alpha)
    else:
        raise ConfigError(f"config field 'generator': unknown generator {gen!r} (b1, b2, orthogonal)")
    union = sample_union(bases, rho=rho, seed=seed)
    sigma = _require(cfg, "sigma", float, positive=True, allow_zero=True)
    if sigma > 0:
        union.X = add_noise(union.X, NoiseConfig(sigma, seed))
        union.noise_sigma = sigma
    return union


def _regularizer(cfg, X, L, d):
    N = X.shape[1]
    method = cfg["method"]
    lam = ex.default_lambda(d) if cfg["lam"] is None else _require(cfg, "lam", float, positive=True)
    if method == "lasso":
        return Lasso(lam)
    if method == "exact_l1":
        return ExactL1()
    if method != "owl":
        raise ConfigError(f"config field 'method': unknown method {method!r} (owl, lasso, exact_l1)")
    r = max(1, int(round(N / L))) if cfg["r"] is None else _require(cfg, "r", int, positive=True)
    if cfg["delta"] is None:
        ratio = _require(cfg, "w1_ratio", float, positive=True)
        delta = (ratio - 1.0) * lam / r
    else:
        delta = _require(cfg, "delta", float, positive=True, allow_zero=True)
    return OwlRamp(RampParams(lam, delta, r))


def cmd_generate(cfg, out):
    union = _generate_union(cfg)
    write_matrix_csv(out, union.X)
    lab = _sidecar(out, "labels")
    ex.write_csv_atomic(lab, ["label"], ([int(l)] for l in union.labels))
    logger.info("wrote %d points to %s and labels to %s", union.X.shape[1], out, lab)
    return EXIT_OK


def cmd_cluster(cfg, out):
    if cfg["data"] is not None:
        X = read_matrix_csv(cfg["data"])
        truth = read_labels_csv(cfg["labels"]) if cfg["labels"] else None
        if truth is not None and truth.size != X.shape[1]:
            raise ConfigError(f"config field 'labels': {truth.size} labels for {X.shape[1]} points")
        L = _require(cfg, "L", int, positive=True)
        d = X.shape[0]
    else:
        union = _generate_union(cfg)
        X, truth = union.X, union.labels
        L = union.n_subspaces
        d = union.bases[0].dim
    N = X.shape[1]
    k = N if cfg["k"] is None else _require(cfg, "k", int, positive=True)
    reg = _regularizer(cfg, X, L, d)
    osc = OscConfig(k, reg, L, seed=cfg["seed"], solver=_solver(cfg))
    logger.info("clustering N=%d points with k=%d %s regressions", N, k, reg.name)
    res = run_osc(X, osc, truth)
    ex.write_csv_atomic(out, ["label"], ([int(l)] for l in res.predicted_labels))
    diag = _sidecar(out, "diagnostics")
    rows = [
        [str(j), _fmt(fpr), _fmt(tpr), str(it), str(int(r.converged)), str(int(r.failed)), _fmt(res.clustering_error)]
        for (j, fpr, tpr, it), r in zip(res.per_seed_diagnostics, res.coefficients.results)
    ]
    ex.write_csv_atomic(diag, ["seed_point", "fpr", "tpr", "iterations", "converged", "failed", "clustering_error"], rows)
    logger.info("clustering error %s, %d of %d regressions failed", _fmt(res.clustering_error), res.failures, k)
    if res.failures == k:
        logger.error("every regression failed")
        return EXIT_FAILED
    return EXIT_OK


def _methods_factory(cfg):
    ratio = _require(cfg, "w1_ratio", float, positive=True)

    def make(union):
        d = union.bases[0].dim
        N = union.X.shape[1]
        lam = ex.default_lambda(d) if cfg["lam"] is None else float(cfg["lam"])
        return {"lasso": Lasso(lam), "owl": OwlRamp(ex.default_ramp(N, union.n_subspaces, d, ratio, lam))}

    return make


def _k_grid(cfg, N, L):
    if cfg["k_grid"] is None:
        return [L, 2 * L, 10, N // 4, N // 2, N]
    try:
        return [_require({"k_grid": k}, "k_grid", int, positive=True) for k in _listify(cfg["k_grid"])]
    except ConfigError:
        raise ConfigError(f"config field 'k_grid': expected positive integers, got {cfg['k_grid']!r}") from None


def cmd_sweep(cfg, out):
    kind = cfg["kind"]
    if kind not in SWEEP_KINDS:
        raise ConfigError(f"config field 'kind': unknown sweep kind {kind!r} ({', '.join(SWEEP_KINDS)})")
    reps = _require(cfg, "replications", int, positive=True)
    seed = cfg["seed"]
    solver = _solver(cfg)
    methods = _methods_factory(cfg)
    logger.info("running %s sweep with %d replications", kind, reps)
    if kind == "roc":
        union = _generate_union(cfg)
        r = None if cfg["r"] is None else _require(cfg, "r", int, positive=True)
        pts = ex.roc_sweep(
            union, cfg["lambdas"], cfg["deltas"], _require(cfg, "n_points", int, positive=True),
            r=r, replications=1, seed=seed, solver=solver,
        )
        ex.roc_csv_export(pts, out)
        return EXIT_OK
    if kind == "affinity":
        d = _require(cfg, "d", int, positive=True)
        N = int(round(cfg["rho"] * d)) * 3
        res = ex.affinity_sweep(cfg["alphas"], _k_grid(cfg, N, 3), methods, d, cfg["rho"], reps, seed, solver)
    elif kind == "rho":
        L, d = _require(cfg, "L", int, positive=True), _require(cfg, "d", int, positive=True)
        N = int(round(max(cfg["rhos"]) * d)) * L
        res = ex.rho_sweep(cfg["rhos"], _k_grid(cfg, N, L), methods, L, d, _require(cfg, "n", int, positive=True), reps, seed, solver)
    else:
        union = _generate_union({**cfg, "sigma": 0.0})
        ks = _k_grid(cfg, union.X.shape[1], union.n_subspaces)
        if kind == "error_vs_k":
            res = ex.error_vs_k(union, methods(union), ks, reps, seed, solver)
        else:
            res = ex.noise_sweep(union, cfg["sigmas"], ks, methods, reps, seed, solver)
    ex.csv_export(res, out)
    logger.info("wrote %d cells to %s", len(res.cells), out)
    return EXIT_OK


# validate parameters accepted per suite, mapped onto suite keyword arguments
_SUITE_PARAMS = {
    "prox-oracle": {"n": ("n", int), "trials": ("trials", int)},
    "lemma1": {"instances": ("instances", int), "trials": ("instances", int), "delta": ("gap", float)},
    "lemma3": {"trials": ("trials", int)},
    "lemma4": {"d": ("dims", lambda v: tuple(int(x) for x in _listify(v))),
               "delta": ("deltas", lambda v: tuple(float(x) for x in _listify(v))),
               "target_prob": ("target_prob", float), "trials": ("trials", int)},
    "theorem1": {"trials": ("trials", int)},
    "theorem2": {"d": ("dims", lambda v: tuple(int(x) for x in _listify(v))), "delta": ("delta", float),
                 "r": ("r", int), "trials": ("trials", int)},
}


def _listify(v):
    return v if isinstance(v, list) else [v]


def cmd_validate(cfg, out):
    suite = cfg["suite"]
    if suite is None:
        raise ConfigError(f"missing suite name ({', '.join(validation.SUITES)})")
    if suite not in validation.SUITES:
        raise ConfigError(f"unknown suite {suite!r} ({', '.join(validation.SUITES)})")
    allowed = _SUITE_PARAMS[suite]
    kwargs = {"seed": cfg["seed"]}
    for key in ("trials", "n", "d", "delta", "target_prob", "r", "instances"):
        if cfg[key] is None:
            continue
        if key not in allowed:
            raise ConfigError(f"config field {key!r} does not apply to suite {suite!r}")
        name, conv = allowed[key]
        try:
            kwargs[name] = conv(cfg[key])
        except (TypeError, ValueError):
            raise ConfigError(f"config field {key!r}: bad value {cfg[key]!r}") from None
    logger.info("running suite %s", suite)
    report = validation.SUITES[suite](**kwargs)
    lines = [report.line()] + ["  " + d for d in report.details]
    print("\n".join(lines))
    if out:
        rows = ([k, v if isinstance(v, str) else _fmt(v)] for k, v in report.measured.items())
        ex.write_csv_atomic(out, ["quantity", "value"], list(rows) + [["passed", str(int(report.passed))]])
    return EXIT_OK if report.passed else EXIT_FAILED


HANDLERS = {"generate": cmd_generate, "cluster": cmd_cluster, "sweep": cmd_sweep, "validate": cmd_validate}


def build_parser():
    p = argparse.ArgumentParser(prog="owlsc", description="OWL subspace clustering toolkit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("args", nargs="*", help="validate: SUITE [key=value ...]")
    p.add_argument("--config", help="flat JSON configuration file")
    p.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
    p.add_argument("--out", help="output file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config field (repeatable)")
    p.add_argument("--replications", type=int, help="sweep replications")
    p.add_argument("-q", "--quiet", action="store_true", help="only report errors on stderr")
    return p


def make_spec(ns):
    overrides = {}
    args = list(ns.args)
    if ns.command == "validate" and args and "=" not in args[0]:
        overrides["suite"] = args.pop(0)
    elif ns.command != "validate" and any("=" not in a for a in args):
        raise ConfigError(f"unexpected argument {next(a for a in args if '=' not in a)!r}")
    overrides.update(parse_overrides(args))
    overrides.update(parse_overrides(ns.set))
    if ns.replications is not None:
        overrides["replications"] = ns.replications
    spec = RunSpec(ns.command, ns.config, ns.out, overrides=overrides)
    return spec, ns.seed


def run(spec, seed_flag=None):
    file_cfg = load_config_file(spec.config_path) if spec.config_path else {}
    over = dict(spec.overrides)
    if seed_flag is not None:
        over["seed"] = seed_flag
    if spec.command == "cluster" and (file_cfg.get("data") or over.get("data")):
        # with user data the number of clusters must be explicit
        if "L" not in file_cfg and "L" not in over:
            raise ConfigError("missing required config field 'L' (number of clusters)")
    cfg = resolve_config(spec.command, file_cfg, over)
    spec.master_seed = cfg["seed"]
    if spec.command != "validate" and not spec.output_path:
        raise ConfigError("--out is required")
    if spec.output_path:
        parent = os.path.dirname(os.path.abspath(spec.output_path))
        if not os.path.isdir(parent):
            raise OSError(f"output directory {parent} does not exist")
    return HANDLERS[spec.command](cfg, spec.output_path)


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING if ns.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        spec, seed = make_spec(ns)
        return run(spec, seed)
    except (ConfigError, ParseError) as err:
        print(f"owlsc: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OutputError, OSError) as err:
        print(f"owlsc: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except OwlscError as err:
        # parameter errors raised by the library count as configuration errors
        print(f"owlsc: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
