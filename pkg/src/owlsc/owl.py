"""Ordered weighted l1 (OWL) norm: weights, norm, dual norm and prox.

The OWL norm of a vector ``beta`` with nonincreasing weights ``w`` is

    Omega_w(beta) = sum_i w_i |beta|_[i]

where ``|beta|_[i]`` is the i-th largest magnitude. Equal weights give the
l1 norm, ``w = [w_1, 0, ..., 0]`` gives a scaled l-infinity norm.
"""
from dataclasses import dataclass

import numba
import numpy as np

from .exceptions import DimensionError, InvalidInputError, InvalidParameterError


@dataclass(frozen=True)
class RampParams:
    """OWL-Ramp parameters.

    Parameters
    ----------
    lam : float
        l1 component, must be positive.
    delta : float
        Slope of the ramp, nonnegative.
    r : int
        Ramp length, at least 1.
    """

    lam: float
    delta: float
    r: int

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidParameterError(f"lam must be > 0, got {self.lam}")
        if not self.delta >= 0:
            raise InvalidParameterError(f"delta must be >= 0, got {self.delta}")
        if int(self.r) != self.r or self.r < 1:
            raise InvalidParameterError(f"r must be an integer >= 1, got {self.r}")

    @property
    def w1(self):
        """Largest weight, ``lam + r * delta``."""
        return self.lam + self.r * self.delta

    def weights(self, n):
        return make_ramp_weights(self, n)


def make_ramp_weights(p, n):
    """OWL-Ramp weights ``w_i = (r - i + 1) * delta + lam`` for ``i <= r``,
    ``lam`` afterwards.

    >>> make_ramp_weights(RampParams(1.0, 0.5, 2), 4)
    array([2. , 1.5, 1. , 1. ])
    """
    if p.r > n:
        raise InvalidParameterError(f"ramp length r={p.r} exceeds n={n}")
    w = np.full(n, float(p.lam))
    w[: p.r] += p.delta * np.arange(p.r, 0, -1, dtype=float)
    return w


def oscar_weights(lam, delta, n):
    """OSCAR weights: the ramp spanning all ``n`` positions."""
    return make_ramp_weights(RampParams(lam, delta, n), n)


def check_weights(w):
    """Validate an OWL weight vector and return it as a float array."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DimensionError("weights must be a non-empty 1-d array")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("weights must be finite")
    if w[0] <= 0:
        raise InvalidParameterError("w_1 must be positive")
    if w[-1] < 0:
        raise InvalidParameterError("weights must be nonnegative")
    if np.any(np.diff(w) > 0):
        raise InvalidParameterError("weights must be nonincreasing")
    return w


def _check_pair(beta, w):
    beta = np.asarray(beta, dtype=float)
    w = np.asarray(w, dtype=float)
    if beta.shape[0] != w.shape[0]:
        raise DimensionError(
            f"length mismatch: beta has {beta.shape[0]} entries, w has {w.shape[0]}"
        )
    return beta, w


def sorted_magnitudes(beta):
    """Magnitudes of ``beta`` sorted in decreasing order (along axis 0)."""
    return -np.sort(-np.abs(beta), axis=0)


def owl_norm(beta, w):
    """Evaluate ``Omega_w(beta)``. ``beta`` may be 2-d, one vector per column."""
    beta, w = _check_pair(beta, w)
    return w @ sorted_magnitudes(beta)


def owl_dual_norm(beta, w):
    """Dual OWL norm ``max_i (sum of i largest |beta|) / (w_1 + ... + w_i)``."""
    beta, w = _check_pair(beta, w)
    prefix = np.cumsum(sorted_magnitudes(beta), axis=0)
    wsum = np.cumsum(w)
    if beta.ndim == 2:
        wsum = wsum[:, None]
    return np.max(prefix / wsum, axis=0)


def min_gap(w):
    """Minimum gap between consecutive weights."""
    w = np.asarray(w, dtype=float)
    if w.size < 2:
        raise InvalidInputError("min_gap needs at least two weights")
    return float(np.min(w[:-1] - w[1:]))


def predict_trivial_solution(gram_response, w):
    """True when the OWL regression has the zero solution.

    ``gram_response`` is ``X.T @ y``; zero is optimal iff the dual norm of
    it is below one.
    """
    return bool(owl_dual_norm(gram_response, w) < 1.0)


@numba.njit(cache=True)
def _prox_sorted_inplace(z, w, out, start, length, block_sum, block_val):
    # z: magnitudes sorted decreasingly; writes the projection of z - w onto
    # the nonnegative nonincreasing cone into out. Stack-based PAV.
    top = -1
    for i in range(z.shape[0]):
        top += 1
        start[top] = i
        length[top] = 1
        block_sum[top] = z[i] - w[i]
        block_val[top] = block_sum[top]
        while top > 0 and block_val[top - 1] <= block_val[top]:
            block_sum[top - 1] += block_sum[top]
            length[top - 1] += length[top]
            block_val[top - 1] = block_sum[top - 1] / length[top - 1]
            top -= 1
    for b in range(top + 1):
        v = block_val[b]
        if v < 0.0:
            v = 0.0
        for i in range(start[b], start[b] + length[b]):
            out[i] = v


@numba.njit(cache=True)
def _prox_owl_rows(VT, order, w, w_pen):
    # row c of VT is one input vector; order[c] sorts |VT[c]| decreasingly.
    # Also returns Omega_{w_pen} of each output row, read off the sorted
    # magnitudes (the prox preserves their order).
    m, n = VT.shape
    out = np.empty_like(VT)
    pen = np.zeros(m)
    start = np.empty(n, np.int64)
    length = np.empty(n, np.int64)
    block_sum = np.empty(n)
    block_val = np.empty(n)
    z = np.empty(n)
    res = np.empty(n)
    for c in range(m):
        for i in range(n):
            z[i] = abs(VT[c, order[c, i]])
        _prox_sorted_inplace(z, w, res, start, length, block_sum, block_val)
        acc = 0.0
        for i in range(n):
            j = order[c, i]
            x = VT[c, j]
            acc += w_pen[i] * res[i]
            if x > 0.0:
                out[c, j] = res[i]
            elif x < 0.0 and res[i] > 0.0:
                out[c, j] = -res[i]
            else:
                out[c, j] = 0.0
        pen[c] = acc
    return out, pen


def prox_owl_penalty(V, w, w_pen):
    """Column-wise prox of ``Omega_w`` on a 2-d array, plus ``Omega_{w_pen}``
    of every output column. Inputs are assumed checked."""
    VT = np.ascontiguousarray(V.T)
    # tied magnitudes always land in one pooled block, so an unstable sort
    # gives the same result as a stable one
    order = np.argsort(-np.abs(VT), axis=1)
    outT, pen = _prox_owl_rows(VT, order, w, w_pen)
    return outT.T, pen


def prox_owl(v, w):
    """Proximal operator of the OWL norm.

    Returns ``argmin_x 0.5 * ||x - v||^2 + Omega_w(x)``. Works on a vector
    or column-wise on a 2-d array. Entries with equal ``|v|`` get equal
    magnitudes, whatever their order in the sort.

    Parameters
    ----------
    v : array_like, shape (N,) or (N, m)
    w : array_like, shape (N,)
        Nonincreasing nonnegative weights.

    Returns
    -------
    numpy.ndarray
        Same shape as ``v``.
    """
    v, w = _check_pair(v, w)
    V = v[:, None] if v.ndim == 1 else v
    out, _ = prox_owl_penalty(V, w, w)
    return out[:, 0] if v.ndim == 1 else np.ascontiguousarray(out)
