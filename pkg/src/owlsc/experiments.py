"""Synthetic experiment harness: ROC trade-off, error vs k, affinity, density
and noise sweeps, plus CSV emission of the results.

Replications redraw the subset of regressed points and the spectral-clustering
seed; the data of a sweep cell is drawn once and shared by every method, so
method differences come from the regularizer alone. Seeds are derived from one
master seed and the cell coordinates, so results do not depend on the order in
which cells are evaluated.
"""
import csv
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidParameterError, OutputError
from .geometry import (
    derive_rng,
    generate_b1,
    generate_b2,
    noisy_union,
    sample_union,
)
from .owl import RampParams, predict_trivial_solution
from .pipeline import (
    CoefficientMatrix,
    ExactL1,
    Lasso,
    OscConfig,
    OwlRamp,
    cluster_from_coefficients,
    compute_coefficients,
    select_seeds,
    seed_rates,
)
from .solvers import SolverConfig

logger = logging.getLogger(__name__)

# lambda = LAMBDA_SCALE / sqrt(d)
LAMBDA_SCALE = 0.05
# largest OWL-Ramp weight as a multiple of lambda
W1_RATIO = 2.0
DEFAULT_REPLICATIONS = 100
ROC_LAMBDAS = tuple(np.geomspace(1e-3, 2.0, 12))
ROC_DELTAS = (0.0, 0.005, 0.01, 0.02, 0.05)

_REP, _DATA, _ROC = 21, 22, 23


def default_lambda(d):
    """l1 level proportional to ``1 / sqrt(d)``."""
    return LAMBDA_SCALE / math.sqrt(d)


def default_ramp(N, L, d, w1_ratio=W1_RATIO, lam=None):
    """OWL-Ramp with ``r = N / L`` and slope chosen so ``w_1 = w1_ratio * lam``."""
    lam = default_lambda(d) if lam is None else lam
    r = max(1, int(round(N / L)))
    return RampParams(lam, (w1_ratio - 1.0) * lam / r, r)


def real_data_ramp(X, lam, ratios=(2.0, 4.0)):
    """Ramp for user data: ``r = N / 4`` and ``w_1`` the first of ``ratios *
    lam`` whose solutions are mostly non-trivial.

    Returns ``(ramp, nontrivial)``; when no ratio works the first ratio is
    returned with ``nontrivial=False``.
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[1]
    r = max(1, int(round(N / 4)))
    G = X.T @ X
    np.fill_diagonal(G, 0.0)
    first = None
    for ratio in ratios:
        ramp = RampParams(lam, (ratio - 1.0) * lam / r, r)
        first = first or ramp
        w = ramp.weights(N)
        trivial = sum(predict_trivial_solution(G[:, j], w) for j in range(N))
        if trivial < N / 2:
            return ramp, True
    return first, False


def default_methods(union, lam=None):
    """Lasso and OWL-Ramp with the default hyper-parameter rules."""
    d = union.bases[0].dim
    N = union.X.shape[1]
    lam = default_lambda(d) if lam is None else lam
    return {
        "lasso": Lasso(lam),
        "owl": OwlRamp(default_ramp(N, union.n_subspaces, d, lam=lam)),
    }


class CoefficientCache:
    """Coefficient columns of one (data, regularizer) pair, solved on demand."""

    def __init__(self, X, regularizer, solver=None):
        self.X = X
        self.regularizer = regularizer
        self.solver = solver or SolverConfig()
        N = X.shape[1]
        self.B = np.zeros((N, N))
        self.results = {}

    def get(self, columns):
        columns = np.asarray(columns, dtype=np.int64)
        missing = np.array([c for c in columns if int(c) not in self.results], dtype=np.int64)
        if missing.size:
            coef = compute_coefficients(self.X, np.sort(missing), self.regularizer, self.solver)
            for j, res in zip(coef.computed_columns, coef.results):
                self.B[:, j] = coef.B[:, j]
                self.results[int(j)] = res
        B = np.zeros_like(self.B)
        B[:, columns] = self.B[:, columns]
        results = [self.results[int(c)] for c in columns]
        return CoefficientMatrix(B, columns, results, sum(r.failed for r in results))


@dataclass
class SweepCell:
    coords: tuple
    method: str
    mean: float
    std: float
    replications: int
    seed: int
    values: list = field(default_factory=list, repr=False)


@dataclass
class SweepResult:
    """Per-cell mean/std of a metric over a grid of axis values."""

    axes: tuple
    cells: list = field(default_factory=list)
    metric: str = "clustering_error"

    def methods(self):
        return sorted({c.method for c in self.cells})

    def get(self, method, **coords):
        for c in self.cells:
            if c.method == method and all(
                np.isclose(c.coords[self.axes.index(k)], v) for k, v in coords.items()
            ):
                return c
        raise KeyError((method, coords))

    def curve(self, method, axis="k", **fixed):
        """``(axis values, means)`` for one method with other axes fixed."""
        i = self.axes.index(axis)
        pts = []
        for c in self.cells:
            if c.method != method:
                continue
            if all(np.isclose(c.coords[self.axes.index(k)], v) for k, v in fixed.items()):
                pts.append((c.coords[i], c.mean))
        pts.sort()
        return np.array([p[0] for p in pts]), np.array([p[1] for p in pts])


def _rep_seed(seed, *keys):
    return int(derive_rng(seed, _REP, *keys).integers(2**62))


def _key(x):
    # float axis values become stable integer keys for seed derivation
    return int(round(float(x) * 1_000_000))


def error_vs_k(union, methods=None, k_grid=None, replications=DEFAULT_REPLICATIONS, seed=0, solver=None, caches=None):
    """Mean clustering error for each method and number of seed regressions k.

    Parameters
    ----------
    union : UnionOfSubspaces
    methods : dict of name -> regularizer, optional
        Defaults to :func:`default_methods`.
    k_grid : sequence of int
    replications : int
        Independent draws of the seed subset (and k-means seed) per cell.
    seed : int
        Master seed. Replication r at a given k uses the same subset for every
        method.
    """
    methods = default_methods(union) if methods is None else methods
    N = union.X.shape[1]
    L = union.n_subspaces
    k_grid = [L, 2 * L, 10, N // 4, N // 2, N] if k_grid is None else list(k_grid)
    if any(not 1 <= k <= N for k in k_grid):
        raise InvalidParameterError(f"k values must lie in [1, {N}]")
    if replications < 1:
        raise InvalidParameterError("replications must be >= 1")
    caches = {} if caches is None else caches
    result = SweepResult(("k",))
    for name, reg in methods.items():
        cache = caches.setdefault(name, CoefficientCache(union.X, reg, solver))
        for k in k_grid:
            errs = []
            for rep in range(replications):
                s = _rep_seed(seed, k, rep)
                cols = select_seeds(N, k, s)
                coef = cache.get(cols)
                cfg = OscConfig(k, reg, L, seed=s)
                errs.append(cluster_from_coefficients(union.X, coef, cfg, union.labels).clustering_error)
            errs = np.asarray(errs)
            result.cells.append(SweepCell((k,), name, float(errs.mean()), float(errs.std()), replications, seed, errs.tolist()))
        logger.info("error_vs_k: %s done", name)
    return result


def smallest_k(result, method, threshold=0.01, **fixed):
    """Smallest k whose mean error is at most ``threshold`` (None if never)."""
    ks, means = result.curve(method, "k", **fixed)
    hit = ks[means <= threshold]
    return int(hit.min()) if hit.size else None


def _extend(result, extra_axes, coords, sub):
    for c in sub.cells:
        result.cells.append(SweepCell(tuple(coords) + c.coords, c.method, c.mean, c.std, c.replications, c.seed, c.values))


def affinity_sweep(alphas, k_grid, methods=None, d=20, rho=5, replications=DEFAULT_REPLICATIONS, seed=0, solver=None):
    """Error surface over (affinity, k) on controlled-affinity unions.

    ``methods`` is a dict or a callable taking the union and returning one.
    """
    result = SweepResult(("alpha", "k"))
    for a in alphas:
        union = sample_union(generate_b2(d, target_affinity=a), rho=rho, seed=_rep_seed(seed, _DATA))
        m = methods(union) if callable(methods) else methods
        sub = error_vs_k(union, m, k_grid, replications, seed, solver)
        _extend(result, ("alpha",), (float(a),), sub)
        logger.info("affinity sweep: alpha=%g done", a)
    return result


def rho_sweep(rhos, k_grid, methods=None, L=3, d=20, n=40, replications=DEFAULT_REPLICATIONS, seed=0, solver=None):
    """Error surface over (points per dimension, k) on random subspaces.

    k values larger than a cell's N are skipped for that cell.
    """
    bases = generate_b1(L, d, n, seed=_rep_seed(seed, _DATA))
    result = SweepResult(("rho", "k"))
    for rho in rhos:
        union = sample_union(bases, rho=rho, seed=_rep_seed(seed, _DATA, _key(rho)))
        m = methods(union) if callable(methods) else methods
        ks = [k for k in k_grid if k <= union.X.shape[1]]
        sub = error_vs_k(union, m, ks, replications, seed, solver)
        _extend(result, ("rho",), (float(rho),), sub)
        logger.info("rho sweep: rho=%g done", rho)
    return result


def noise_sweep(union, sigmas, k_grid, methods=None, replications=DEFAULT_REPLICATIONS, seed=0, solver=None):
    """Error surface over (noise level, k). sigma = 0 reproduces
    :func:`error_vs_k` on the clean data under the same master seed."""
    if any(s < 0 for s in sigmas):
        raise InvalidParameterError("noise levels must be >= 0")
    result = SweepResult(("sigma", "k"))
    for sigma in sigmas:
        noisy = union if sigma == 0 else noisy_union(union, sigma, _rep_seed(seed, _DATA, _key(sigma)))
        m = methods(noisy) if callable(methods) else (methods or default_methods(union))
        sub = error_vs_k(noisy, m, k_grid, replications, seed, solver)
        _extend(result, ("sigma",), (float(sigma),), sub)
        logger.info("noise sweep: sigma=%g done", sigma)
    return result


@dataclass
class RocPoint:
    method: str
    lam: float
    delta: float
    fpr: float
    tpr: float


def roc_sweep(union, lambdas=ROC_LAMBDAS, deltas=ROC_DELTAS, n_points=100, r=None, replications=1, seed=0, include_exact=True, solver=None):
    """Average (FPR, TPR) of single regressions over a (lambda, delta) grid.

    ``delta = 0`` cells are Lasso; the others OWL-Ramp with ramp length ``r``
    (default ``N / L``). Exact l1 adds one point.
    """
    X, labels = union.X, union.labels
    N = X.shape[1]
    r = int(round(N / union.n_subspaces)) if r is None else r
    regs = []
    for lam in lambdas:
        for delta in deltas:
            if delta == 0:
                regs.append(("lasso", lam, 0.0, Lasso(lam)))
            else:
                regs.append(("owl", lam, delta, OwlRamp(RampParams(lam, delta, r))))
    if include_exact:
        regs.append(("exact_l1", 0.0, 0.0, ExactL1()))
    out = []
    for name, lam, delta, reg in regs:
        rates = []
        for rep in range(replications):
            cols = select_seeds(N, min(n_points, N), _rep_seed(seed, _ROC, rep))
            coef = compute_coefficients(X, cols, reg, solver)
            rates.extend(seed_rates(coef.B[:, j], labels, j) for j in cols)
        fpr, tpr = np.mean(rates, axis=0)
        out.append(RocPoint(name, float(lam), float(delta), float(fpr), float(tpr)))
    return out


def roc_envelope(points, method=None):
    """Upper TPR envelope: points sorted by FPR with TPR made nondecreasing,
    anchored at (0, 0)."""
    pts = [p for p in points if method is None or p.method == method]
    f = np.array([0.0] + [p.fpr for p in pts])
    t = np.array([0.0] + [p.tpr for p in pts])
    order = np.lexsort((t, f))
    f, t = f[order], np.maximum.accumulate(t[order])
    return f, t


def envelope_tpr(points, fpr, method=None):
    """TPR of the upper envelope at the given FPR (linear interpolation)."""
    f, t = roc_envelope(points, method)
    return np.interp(fpr, f, t)


CSV_FIELDS = ("method", "mean", "std", "replications", "seed")


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv_atomic(path, header, rows):
    """Write rows to ``path`` through a temporary file and a rename, so an
    interrupted run never leaves a partial file behind. ``header=None``
    writes no header row."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    tmp = None
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
        with os.fdopen(fd, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\r\n")
            if header is not None:
                wr.writerow(header)
            wr.writerows(rows)
        os.replace(tmp, path)
    except OSError as err:
        if tmp is not None and os.path.exists(tmp):
            os.unlink(tmp)
        raise OutputError(f"cannot write {path}: {err}") from err
    except BaseException:
        if tmp is not None and os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_export(result, path):
    """Write a sweep result as CSV; the file appears atomically."""
    rows = (
        [_fmt(v) for v in c.coords] + [c.method, _fmt(c.mean), _fmt(c.std), str(c.replications), str(c.seed)]
        for c in result.cells
    )
    write_csv_atomic(path, list(result.axes) + list(CSV_FIELDS), rows)


def csv_import(path):
    """Read a CSV written by :func:`csv_export`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    naxes = len(header) - len(CSV_FIELDS)
    result = SweepResult(tuple(header[:naxes]))
    for row in rows[1:]:
        coords = tuple(int(v) if v.lstrip("-").isdigit() else float(v) for v in row[:naxes])
        method, mean, std, reps, seed = row[naxes:]
        result.cells.append(SweepCell(coords, method, float(mean), float(std), int(reps), int(seed)))
    return result


def roc_csv_export(points, path):
    """Write ROC points with the same atomic CSV conventions."""
    rows = ([p.method, _fmt(p.lam), _fmt(p.delta), _fmt(p.fpr), _fmt(p.tpr)] for p in points)
    write_csv_atomic(path, ["method", "lambda", "delta", "fpr", "tpr"], rows)
