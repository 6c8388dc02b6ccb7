"""Brute-force reference solutions used to check the fast paths.

:func:`prox_owl_bruteforce` finds the OWL prox by enumerating every face of
the piecewise-linear penalty: a sign for each nonzero entry, a set of zero
entries, and an ordered partition of the rest into groups of equal magnitude.
On each face the objective is a smooth quadratic with a closed-form
minimizer; the prox is the best minimizer that actually lies on its face.
Nothing here uses sorting-based shortcuts, so it is independent of
:func:`owlsc.owl.prox_owl`.
"""
import itertools
from functools import lru_cache

import numpy as np

from .exceptions import DimensionError

MAX_BRUTEFORCE_N = 5


def _ordered_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    n = len(items)
    # choose the first block, recurse on the rest
    for size in range(1, n + 1):
        for first in itertools.combinations(items, size):
            rest = [i for i in items if i not in first]
            for tail in _ordered_partitions(rest):
                yield [list(first)] + tail


@lru_cache(maxsize=None)
def _faces(N):
    """Linear maps ``x = P v - Q w`` and ``m = A v - C w`` for every face.

    ``m`` holds group magnitudes padded with +inf/-inf sentinels so
    feasibility is ``m[:, g] > m[:, g + 1]`` and ``m > 0`` on real groups.
    """
    P, Q, A, C, ngroups = [], [], [], [], []
    idx = range(N)
    for nz_count in range(N + 1):
        for nonzero in itertools.combinations(idx, nz_count):
            for groups in _ordered_partitions(nonzero):
                for signs in itertools.product((1.0, -1.0), repeat=nz_count):
                    s = dict(zip(nonzero, signs))
                    p = np.zeros((N, N))
                    q = np.zeros((N, N))
                    a = np.zeros((N, N))
                    c = np.zeros((N, N))
                    pos = 0
                    for g, members in enumerate(groups):
                        size = len(members)
                        slots = range(pos, pos + size)
                        pos += size
                        for j in members:
                            a[g, j] = s[j] / size
                            for i in members:
                                p[j, i] = s[j] * s[i] / size
                            for t in slots:
                                q[j, t] = s[j] / size
                        for t in slots:
                            c[g, t] = 1.0 / size
                    P.append(p)
                    Q.append(q)
                    A.append(a)
                    C.append(c)
                    ngroups.append(len(groups))
    return np.array(P), np.array(Q), np.array(A), np.array(C), np.array(ngroups)


def prox_owl_bruteforce(v, w):
    """Exact ``argmin_x 0.5||x - v||^2 + Omega_w(x)`` for ``len(v) <= 5``."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    N = v.size
    if w.size != N:
        raise DimensionError("length mismatch")
    if N > MAX_BRUTEFORCE_N:
        raise DimensionError(f"brute force supports N <= {MAX_BRUTEFORCE_N}")
    P, Q, A, C, ng = _faces(N)
    x = P @ v - Q @ w
    m = A @ v - C @ w
    gidx = np.arange(N)
    real = gidx[None, :] < ng[:, None]
    positive = np.all(np.where(real, m > 0, True), axis=1)
    nxt = np.concatenate([m[:, 1:], np.zeros((m.shape[0], 1))], axis=1)
    has_next = (gidx[None, :] + 1) < ng[:, None]
    ordered = np.all(np.where(has_next, m > nxt, True), axis=1)
    ok = positive & ordered
    mags = -np.sort(-np.abs(x[ok]), axis=1)
    obj = 0.5 * np.sum((x[ok] - v) ** 2, axis=1) + mags @ w
    return x[ok][int(np.argmin(obj))]
