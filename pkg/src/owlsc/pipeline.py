"""OWL subspace clustering (OSC) with k random seed regressions.

The pipeline regresses k randomly chosen points onto the remaining points,
stores the coefficients as columns of ``B``, forms ``W = |B| + |B|^T`` and
spectrally clusters ``W``. :func:`greedy_peel` is the spectral-free variant
that repeatedly solves one OWL regression and removes the selected points.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans

from .exceptions import DimensionError, InvalidInputError, InvalidParameterError
from .geometry import derive_rng
from .owl import RampParams
from .solvers import (
    SolverConfig,
    lipschitz_estimate,
    solve_basis_pursuit_many,
    solve_owl_many,
    support_mask,
)

logger = logging.getLogger(__name__)

KMEANS_RESTARTS = 20
_SEEDS, _SPECTRAL, _FALLBACK, _PEEL = 11, 12, 13, 14
# w_1 = 0.2 spread over a 5-step ramp, tail 1e-6
PEEL_RAMP = RampParams(1e-6, 0.04, 5)


@dataclass(frozen=True)
class ExactL1:
    """Equality-constrained l1 regression (basis pursuit)."""

    name = "exact_l1"


@dataclass(frozen=True)
class Lasso:
    lam: float
    name = "lasso"

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidParameterError("lasso lam must be > 0")

    def weights(self, n):
        return np.full(n, float(self.lam))


@dataclass(frozen=True)
class OwlRamp:
    ramp: RampParams
    name = "owl"

    def weights(self, n):
        # a ramp longer than the problem is truncated to its leading part
        p = self.ramp
        if p.r > n:
            p = RampParams(p.lam, p.delta, n)
        return p.weights(n)


@dataclass
class OscConfig:
    k: int
    regularizer: object
    num_clusters: int
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParameterError("k must be >= 1")
        if self.num_clusters < 1:
            raise InvalidParameterError("num_clusters must be >= 1")


@dataclass
class CoefficientMatrix:
    """Self-representation coefficients; column j holds the regression of
    point j (zero for points that were not regressed)."""

    B: np.ndarray
    computed_columns: np.ndarray
    results: list = field(default_factory=list)
    failures: int = 0

    def restrict(self, columns):
        """Coefficient matrix keeping only the given computed columns."""
        columns = np.asarray(columns, dtype=np.int64)
        B = np.zeros_like(self.B)
        B[:, columns] = self.B[:, columns]
        pos = {int(c): i for i, c in enumerate(self.computed_columns)}
        results = [self.results[pos[int(c)]] for c in columns] if self.results else []
        failures = sum(1 for r in results if r.failed)
        return CoefficientMatrix(B, columns, results, failures)


@dataclass
class SpectralResult:
    labels: np.ndarray
    degenerate: bool
    n_isolated: int


@dataclass
class ClusteringResult:
    predicted_labels: np.ndarray
    clustering_error: float
    per_seed_diagnostics: list
    coefficients: CoefficientMatrix
    affinity: np.ndarray
    degenerate: bool = False

    @property
    def failures(self):
        return self.coefficients.failures


def select_seeds(N, k, seed):
    """k distinct indices drawn uniformly without replacement from range(N)."""
    if not 1 <= k <= N:
        raise InvalidParameterError(f"k must lie in [1, N={N}], got {k}")
    return derive_rng(seed, _SEEDS).choice(N, size=k, replace=False)


def _check_points(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X must be 2-d")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("X must be finite")
    if np.any(np.abs(np.linalg.norm(X, axis=0) - 1.0) > 1e-9):
        raise InvalidInputError("columns of X must have unit norm")
    return X


def compute_coefficients(X, seeds, regularizer, solver=None):
    """Regress each seed point onto the other points.

    The regressed point's own coefficient is held at zero. Failed columns are
    zero-filled and counted in ``failures``.
    """
    X = _check_points(X)
    solver = solver or SolverConfig()
    seeds = np.asarray(seeds, dtype=np.int64)
    N = X.shape[1]
    B = np.zeros((N, N))
    if seeds.size == 0:
        return CoefficientMatrix(B, seeds)
    Y = X[:, seeds]
    if isinstance(regularizer, ExactL1):
        results = solve_basis_pursuit_many(X, Y, solver, exclude=seeds)
    else:
        results = solve_owl_many(
            X, Y, regularizer.weights(N), solver, exclude=seeds, lipschitz=lipschitz_estimate(X)
        )
    failures = 0
    for j, res in zip(seeds, results):
        if res.failed:
            failures += 1
            continue
        B[:, j] = res.beta
        B[j, j] = 0.0
    if failures:
        logger.warning("%d of %d regressions failed", failures, seeds.size)
    return CoefficientMatrix(B, seeds, results, failures)


def build_affinity(B):
    """Symmetric affinity ``|B| + |B|^T``."""
    B = B.B if isinstance(B, CoefficientMatrix) else np.asarray(B, dtype=float)
    A = np.abs(B)
    W = A + A.T
    np.fill_diagonal(W, 0.0)
    return W


def spectral_embedding(W, L):
    """Row-normalized bottom-L eigenvectors of the normalized Laplacian.

    Returns ``(embedding, isolated)`` where ``isolated`` marks zero-degree
    vertices, whose rows are left at zero.
    """
    W = np.asarray(W, dtype=float)
    N = W.shape[0]
    deg = W.sum(axis=1)
    isolated = deg == 0
    eps = 1e-8 * deg.max() if deg.max() > 0 else 1e-8
    dinv = 1.0 / np.sqrt(deg + eps)
    lap = np.eye(N) - dinv[:, None] * W * dinv[None, :]
    _, vecs = scipy.linalg.eigh(lap, subset_by_index=[0, L - 1])
    vecs[isolated] = 0.0
    norms = np.linalg.norm(vecs, axis=1)
    isolated |= norms <= 1e-12 * max(norms.max(), 1e-300)
    emb = np.zeros_like(vecs)
    ok = ~isolated
    emb[ok] = vecs[ok] / norms[ok, None]
    return emb, isolated


def spectral_clustering(W, L, seed=0, points=None):
    """Normalized spectral clustering of the affinity ``W`` into L groups.

    Vertices with no edges cannot be placed by the embedding; they inherit the
    label of the embedded point most aligned with them in ``points`` (one
    point per column), or a random label when no points are given.
    """
    W = np.asarray(W, dtype=float)
    N = W.shape[0]
    if W.shape != (N, N):
        raise DimensionError("W must be square")
    if not 1 <= L <= N:
        raise InvalidParameterError(f"L must lie in [1, N={N}]")
    labels = np.zeros(N, dtype=np.int64)
    if L == 1:
        return SpectralResult(labels, bool(np.all(W == 0)), int(np.sum(W.sum(axis=1) == 0)))
    emb, isolated = spectral_embedding(W, L)
    ok = np.flatnonzero(~isolated)
    degenerate = ok.size < L
    if not degenerate:
        km = KMeans(n_clusters=L, init="k-means++", n_init=KMEANS_RESTARTS, random_state=int(seed) % (2**32))
        labels[ok] = km.fit_predict(emb[ok])
    iso = np.flatnonzero(isolated)
    if iso.size:
        if points is not None and ok.size and not degenerate:
            P = np.asarray(points, dtype=float)
            sim = np.abs(P[:, iso].T @ P[:, ok])
            labels[iso] = labels[ok[np.argmax(sim, axis=1)]]
        else:
            labels[iso] = derive_rng(seed, _FALLBACK).integers(0, L, size=iso.size)
    return SpectralResult(labels, degenerate, int(iso.size))


def clustering_error(predicted, truth, L=None):
    """Fraction of misclassified points under the best label matching."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise DimensionError("label arrays differ in length")
    if predicted.size == 0:
        return 0.0
    _, p = np.unique(predicted, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    conf = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(conf, (p, t), 1)
    rows, cols = linear_sum_assignment(conf, maximize=True)
    return 1.0 - conf[rows, cols].sum() / predicted.size


def fpr_tpr(beta, same_mask):
    """(false positive rate, true positive rate) of a coefficient vector.

    ``same_mask`` marks points of the regressed point's subspace; the
    regressed point itself must already be removed from both sets (pass
    ``beta`` and ``same_mask`` with that index dropped, or see
    :func:`seed_rates`).
    """
    beta = np.asarray(beta)
    same = np.asarray(same_mask, dtype=bool)
    if beta.shape != same.shape:
        raise DimensionError("mask length must match beta")
    other = ~same
    if not same.any() or not other.any():
        raise InvalidInputError("both the same-subspace set and its complement must be nonempty")
    nz = support_mask(beta)
    return float(nz[other].sum() / other.sum()), float(nz[same].sum() / same.sum())


def seed_rates(beta, labels, j):
    """FPR/TPR for the regression of point ``j`` (its own index excluded)."""
    keep = np.ones(labels.size, dtype=bool)
    keep[j] = False
    return fpr_tpr(np.asarray(beta)[keep], (labels == labels[j])[keep])


def cluster_from_coefficients(X, coef, cfg, truth=None):
    """Affinity, spectral clustering and diagnostics for given coefficients."""
    W = build_affinity(coef)
    spec = spectral_clustering(W, cfg.num_clusters, seed=cfg.seed, points=X)
    err = float("nan") if truth is None else clustering_error(spec.labels, truth, cfg.num_clusters)
    diags = []
    for j, res in zip(coef.computed_columns, coef.results):
        if truth is not None and np.unique(truth).size > 1:
            fpr, tpr = seed_rates(coef.B[:, j], np.asarray(truth), j)
        else:
            fpr = tpr = float("nan")
        diags.append((int(j), fpr, tpr, int(res.iterations)))
    return ClusteringResult(spec.labels, err, diags, coef, W, spec.degenerate)


def run_osc(X, cfg, truth=None):
    """Cluster the columns of X with k seed regressions.

    Parameters
    ----------
    X : ndarray, shape (n, N)
        Unit-norm points as columns.
    cfg : OscConfig
    truth : array of int, optional
        True labels; enables the clustering error and FPR/TPR diagnostics.

    Returns
    -------
    ClusteringResult
    """
    X = _check_points(X)
    N = X.shape[1]
    if cfg.k > N:
        raise InvalidParameterError(f"k={cfg.k} exceeds N={N}")
    if cfg.num_clusters > N:
        raise InvalidParameterError(f"num_clusters={cfg.num_clusters} exceeds N={N}")
    seeds = select_seeds(N, cfg.k, cfg.seed)
    coef = compute_coefficients(X, seeds, cfg.regularizer, cfg.solver)
    return cluster_from_coefficients(X, coef, cfg, truth)


@dataclass
class PeelResult:
    labels: np.ndarray
    n_clusters: int
    rounds: int
    seeds: list


def greedy_peel(X, ramp=None, seed=0, solver=None):
    """Cluster by repeated single OWL regressions.

    Pick a random remaining point, regress it on the other remaining points,
    put it and every point with a nonzero coefficient in a new cluster, and
    remove them. Each round removes at least the picked point.

    ``ramp`` defaults to :data:`PEEL_RAMP`. Peeling wants the whole subspace
    in one support, which takes nearly l-inf weights: a short ramp (r below
    the subspace size) over an almost-zero tail. The clustering defaults,
    with ``w_1 = 2 lam`` and r = N / L, select only a handful of points.
    """
    X = _check_points(X)
    ramp = PEEL_RAMP if ramp is None else ramp
    solver = solver or SolverConfig()
    N = X.shape[1]
    rng = derive_rng(seed, _PEEL)
    labels = np.full(N, -1, dtype=np.int64)
    remaining = np.arange(N)
    seeds = []
    cluster = 0
    while remaining.size:
        pos = int(rng.integers(remaining.size))
        j = int(remaining[pos])
        seeds.append(j)
        members = [j]
        if remaining.size > 1:
            Xr = X[:, remaining]
            w = OwlRamp(ramp).weights(remaining.size)
            res = solve_owl_many(Xr, X[:, [j]], w, solver, exclude=[pos])[0]
            sel = support_mask(res.beta)
            sel[pos] = False
            members.extend(int(i) for i in remaining[sel])
        labels[members] = cluster
        cluster += 1
        remaining = remaining[labels[remaining] < 0]
    return PeelResult(labels, cluster, len(seeds), seeds)
