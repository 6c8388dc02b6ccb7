"""Union-of-subspaces data model and subspace geometry.

Covers basis generation (random orthonormal "B1" bases and the
controlled-affinity "B2" construction), sampling from the semi-random model,
the sphere noise model, principal angles and normalized affinity, PCA
projection, and random geometric graphs on the sphere.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import DisjointSet
from scipy.spatial.distance import pdist, squareform

from .exceptions import DimensionError, InvalidInputError, InvalidParameterError

# stream tags for seed derivation
_BASIS, _POINTS, _NOISE, _SPHERE = 1, 2, 3, 4


def derive_rng(seed, *keys):
    """Independent generator for ``(seed, *keys)``.

    Every random draw in the package goes through here, so one master seed
    replays a whole experiment bit for bit.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis ``U`` (n x d) of a linear subspace."""

    U: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 2 or U.shape[1] == 0:
            raise DimensionError("basis must be a 2-d array with at least one column")
        if not np.allclose(U.T @ U, np.eye(U.shape[1]), atol=1e-10, rtol=0):
            raise InvalidInputError("basis columns are not orthonormal")
        object.__setattr__(self, "U", U)

    @property
    def dim(self):
        return self.U.shape[1]

    @property
    def ambient(self):
        return self.U.shape[0]


@dataclass
class UnionOfSubspaces:
    """Points sampled from a union of subspaces.

    Attributes
    ----------
    bases : list of SubspaceBasis
    points_per_subspace : list of int
    labels : ndarray of int, shape (N,)
    X : ndarray, shape (n, N)
        Unit-norm data points as columns.
    """

    bases: list
    points_per_subspace: list
    labels: np.ndarray
    X: np.ndarray
    noise_sigma: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_subspaces(self):
        return len(self.bases)

    @property
    def densities(self):
        """Sampling density ``N_l / d_l`` per subspace."""
        return [N / b.dim for N, b in zip(self.points_per_subspace, self.bases)]

    def same_subspace_mask(self, j):
        """Mask of points sharing the label of point ``j``, excluding ``j``."""
        m = self.labels == self.labels[j]
        m[j] = False
        return m


@dataclass(frozen=True)
class NoiseConfig:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidParameterError("sigma must be >= 0")


@dataclass(frozen=True)
class TheoremBounds:
    """Empirical stand-ins for the unspecified constants of the theory.

    ``kappa0`` scales the affinity ceiling for no false discoveries and
    ``kappa1`` the sample count for a connected random geometric graph.
    The defaults were calibrated once by Monte Carlo (see
    ``owlsc.validation.calibrate_kappa0`` and ``calibrate_kappa1``).
    """

    kappa0: float = 2.3
    kappa1: float = 12.0

    def __post_init__(self):
        if not (self.kappa0 > 0 and self.kappa1 > 0):
            raise InvalidParameterError("kappa0 and kappa1 must be positive")


def sample_sphere_uniform(d, seed, size=None):
    """Uniform point(s) on the unit sphere in R^d (normalized Gaussians).

    With ``size`` given, returns a (d, size) array of column points.
    """
    if d < 1:
        raise InvalidParameterError("d must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed, _SPHERE)
    g = rng.standard_normal(d if size is None else (d, size))
    return g / np.linalg.norm(g, axis=0)


def random_orthonormal(n, d, rng):
    """Q factor of an n x d Gaussian matrix, with signs fixed so the draw is
    Haar distributed."""
    if d > n:
        raise InvalidParameterError(f"d={d} exceeds ambient n={n}")
    q, r = np.linalg.qr(rng.standard_normal((n, d)))
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    return q * s


def generate_b1(L=3, d=20, n=40, seed=0):
    """Independent uniformly random d-dimensional subspaces of R^n."""
    if d > n:
        raise InvalidParameterError(f"d={d} exceeds ambient n={n}")
    return [SubspaceBasis(random_orthonormal(n, d, derive_rng(seed, _BASIS, l))) for l in range(L)]


def generate_orthogonal(L=3, d=5, n=None, seed=None):
    """L mutually orthogonal d-dimensional subspaces of R^n (n >= L*d).

    Without a seed the bases are blocks of the identity; with a seed a common
    random rotation is applied.
    """
    n = L * d if n is None else n
    if L * d > n:
        raise InvalidParameterError(f"{L} orthogonal {d}-dim subspaces need n >= {L * d}")
    Q = np.eye(n) if seed is None else random_orthonormal(n, n, derive_rng(seed, _BASIS))
    return [SubspaceBasis(Q[:, l * d : (l + 1) * d]) for l in range(L)]


def b2_angles(d, target_affinity):
    """Principal angles whose cos^2 is linear in the index and averages to
    ``target_affinity**2``."""
    if not 0.0 <= target_affinity <= 1.0:
        raise InvalidParameterError("target affinity must lie in [0, 1]")
    a2 = target_affinity**2
    hi = min(1.0, 2.0 * a2)
    lo = 2.0 * a2 - hi
    cos2 = np.linspace(hi, lo, d) if d > 1 else np.array([a2])
    return np.arccos(np.sqrt(np.clip(cos2, 0.0, 1.0)))


def generate_b2(d=20, target_affinity=None, theta=None):
    """Three subspaces of R^{2d}: ``[I; 0]``, ``[0; I]`` and
    ``[diag(cos theta); diag(sin theta)]``.

    Give either the angle vector ``theta`` or the affinity wanted between the
    first and third subspace.
    """
    if theta is None:
        if target_affinity is None:
            raise InvalidParameterError("give target_affinity or theta")
        theta = b2_angles(d, target_affinity)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (d,):
        raise DimensionError(f"theta must have length d={d}")
    I = np.eye(d)
    Z = np.zeros((d, d))
    U1 = np.vstack([I, Z])
    U2 = np.vstack([Z, I])
    U3 = np.vstack([np.diag(np.cos(theta)), np.diag(np.sin(theta))])
    return [SubspaceBasis(U1), SubspaceBasis(U2), SubspaceBasis(U3)]


def sample_union(bases, rho=None, counts=None, seed=0):
    """Draw points uniformly from the unit sphere of each subspace.

    Either ``rho`` (points per dimension, ``N_l = rho * d_l``) or explicit
    per-subspace ``counts`` must be given.
    """
    if (rho is None) == (counts is None):
        raise InvalidParameterError("give exactly one of rho or counts")
    if counts is None:
        counts = [int(round(rho * b.dim)) for b in bases]
    elif np.isscalar(counts):
        counts = [int(counts)] * len(bases)
    counts = [int(c) for c in counts]
    if any(c < 1 for c in counts):
        raise InvalidParameterError("every subspace needs at least one point")
    n = bases[0].ambient
    if any(b.ambient != n for b in bases):
        raise DimensionError("bases live in different ambient spaces")
    cols, labels = [], []
    for l, (b, c) in enumerate(zip(bases, counts)):
        coef = sample_sphere_uniform(b.dim, derive_rng(seed, _POINTS, l), size=c)
        pts = b.U @ coef
        cols.append(pts / np.linalg.norm(pts, axis=0))
        labels.append(np.full(c, l))
    X = np.hstack(cols)
    return UnionOfSubspaces(list(bases), counts, np.concatenate(labels), X)


def add_noise(X, cfg):
    """Perturb each unit column by a uniform vector on the sphere of radius
    ``sigma`` and renormalize."""
    X = np.asarray(X, dtype=float)
    if cfg.sigma == 0:
        return X.copy()
    u = sample_sphere_uniform(X.shape[0], derive_rng(cfg.seed, _NOISE), size=X.shape[1])
    Y = X + cfg.sigma * u
    return Y / np.linalg.norm(Y, axis=0)


def noisy_union(union, sigma, seed):
    """Copy of ``union`` with sphere noise added to its points."""
    X = add_noise(union.X, NoiseConfig(sigma, seed))
    return UnionOfSubspaces(union.bases, union.points_per_subspace, union.labels, X, sigma, dict(union.meta))


def _basis_array(U):
    return U.U if isinstance(U, SubspaceBasis) else np.asarray(U, dtype=float)


def principal_angles(U, V):
    """Principal angles (radians, nondecreasing) between span(U) and span(V)."""
    A, B = _basis_array(U), _basis_array(V)
    if A.shape[0] != B.shape[0]:
        raise DimensionError("bases must share the ambient dimension")
    s = np.linalg.svd(A.T @ B, compute_uv=False)
    return np.arccos(np.clip(s, 0.0, 1.0))


def affinity(U, V):
    """Normalized affinity ``sqrt(sum cos^2(theta_i) / min(d, d'))`` in [0, 1]."""
    A, B = _basis_array(U), _basis_array(V)
    if A.shape[0] != B.shape[0]:
        raise DimensionError("bases must share the ambient dimension")
    s = np.clip(np.linalg.svd(A.T @ B, compute_uv=False), 0.0, 1.0)
    return float(min(1.0, math.sqrt(np.sum(s**2) / min(A.shape[1], B.shape[1]))))


def max_affinity(union, l):
    """Largest affinity between subspace ``l`` and any other subspace."""
    bases = union.bases if isinstance(union, UnionOfSubspaces) else union
    if len(bases) < 2:
        raise InvalidParameterError("max_affinity needs at least two subspaces")
    return max(affinity(bases[l], bases[k]) for k in range(len(bases)) if k != l)


def build_delta_rgg(points, delta):
    """Adjacency of the graph joining points at distance ``<= delta``.

    ``points`` holds one point per column. Returns a boolean (N, N) matrix with
    an empty diagonal.
    """
    if delta < 0:
        raise InvalidParameterError("delta must be >= 0")
    P = np.asarray(points, dtype=float)
    N = P.shape[1]
    if N < 2:
        return np.zeros((N, N), dtype=bool)
    A = squareform(pdist(P.T) <= delta)
    return A.astype(bool)


def rgg_components(adjacency):
    """Number of connected components via union-find."""
    A = np.asarray(adjacency)
    N = A.shape[0]
    if N == 0:
        raise InvalidInputError("graph has no vertices")
    ds = DisjointSet(range(N))
    for i, j in zip(*np.nonzero(np.triu(A, 1))):
        ds.merge(int(i), int(j))
    return ds.n_subsets


def rgg_connected(adjacency):
    """``(connected, component_count)`` for an adjacency matrix."""
    k = rgg_components(adjacency)
    return k == 1, k


def rgg_sample_bound(delta, d, target_prob, bounds=None):
    """Points needed for a connected delta-RGG on the d-sphere with
    probability ``1 - target_prob``: ``ceil(k1 * D * log(D / target_prob))``
    with ``D = delta**-d``."""
    bounds = bounds or TheoremBounds()
    if not 0 < delta <= 2:
        raise InvalidParameterError("delta must lie in (0, 2]")
    if d < 1:
        raise InvalidParameterError("d must be >= 1")
    if not 0 < target_prob < 1:
        raise InvalidParameterError("target probability must lie in (0, 1)")
    D = delta ** (-d)
    return int(math.ceil(bounds.kappa1 * D * math.log(D / target_prob)))


def no_false_discovery_ceiling(union, l, w, bounds=None):
    """Affinity ceiling under which subspace ``l`` should see no false
    discoveries: ``k0 * (tail mean of w / w_1) * sqrt(log(N_l / d_l)) / log N``.

    The tail mean averages ``w[N_l:]`` (the weights left after the in-subspace
    coordinates take the top positions).
    """
    bounds = bounds or TheoremBounds()
    w = np.asarray(w, dtype=float)
    N = w.size
    Nl = union.points_per_subspace[l]
    d = union.bases[l].dim
    tail = w[Nl:]
    wbar = tail.mean() if tail.size else w[-1]
    rho = Nl / d
    if rho <= 1:
        return 0.0
    return bounds.kappa0 * (wbar / w[0]) * math.sqrt(math.log(rho)) / math.log(N)


def pca_project(X, target_dim):
    """Project columns onto the top ``target_dim`` left singular vectors and
    renormalize to unit norm.

    Returns the projected (target_dim, N) array expressed in the principal
    coordinates.
    """
    X = np.asarray(X, dtype=float)
    n, N = X.shape
    if not 1 <= target_dim <= min(n, N):
        raise InvalidParameterError(f"target_dim must lie in [1, {min(n, N)}]")
    U, _, _ = np.linalg.svd(X, full_matrices=False)
    P = U[:, :target_dim].T @ X
    norms = np.linalg.norm(P, axis=0)
    if np.any(norms == 0):
        raise InvalidInputError("a point projects to zero")
    return P / norms


def pca_energy(X, target_dim):
    """Fraction of squared Frobenius norm captured by the top components."""
    s = np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False)
    return float(np.sum(s[:target_dim] ** 2) / np.sum(s**2))
