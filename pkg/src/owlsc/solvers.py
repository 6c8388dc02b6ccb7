"""Solvers for the exact l1, Lasso and OWL sparse regressions.

``solve_owl`` and ``solve_lasso`` use accelerated proximal gradient (FISTA)
with function-value restart; ``solve_basis_pursuit`` uses over-relaxed ADMM.
The ``*_many`` variants solve one regression per column of ``Y`` and are what
the clustering pipeline calls.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .exceptions import DimensionError, InfeasibleError, InvalidInputError, InvalidParameterError
from .owl import check_weights, prox_owl, prox_owl_penalty, sorted_magnitudes

# |beta_i| > NONZERO_RTOL * max(1, ||beta||_inf) counts as a nonzero coefficient
NONZERO_RTOL = 1e-6

_UNIT_NORM_TOL = 1e-9
_ADMM_OVER_RELAXATION = 1.5
# iterations between duality-gap checks in basis pursuit
_GAP_CHECK_EVERY = 20
# relative duality gap accepted from the LP certificate
_CERT_TOL = 1e-7


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls shared by all solvers.

    ``max_iterations`` caps the proximal-gradient solvers and
    ``admm_max_iterations`` caps basis pursuit. ADMM with a fixed penalty is
    far slower per unit of accuracy, but it usually exits early on a dual
    certificate, so the larger cap is rarely reached.
    """

    max_iterations: int = 2000
    rel_tolerance: float = 1e-8
    admm_rho: float = 1.0
    acceleration: bool = True
    admm_max_iterations: int = 20000

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidParameterError("max_iterations must be >= 1")
        if self.admm_max_iterations < 1:
            raise InvalidParameterError("admm_max_iterations must be >= 1")
        if not self.rel_tolerance > 0:
            raise InvalidParameterError("rel_tolerance must be > 0")
        if not self.admm_rho > 0:
            raise InvalidParameterError("admm_rho must be > 0")


@dataclass
class SolverResult:
    beta: np.ndarray
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    residual_norm: float
    failed: bool = False
    message: str = field(default="")


def support_mask(beta):
    """Boolean mask of numerically nonzero coefficients."""
    beta = np.asarray(beta)
    scale = max(1.0, float(np.max(np.abs(beta), initial=0.0)))
    return np.abs(beta) > NONZERO_RTOL * scale


def lipschitz_estimate(X, max_iterations=500, tol=1e-12, seed=0):
    """Largest eigenvalue of ``X.T @ X`` by power iteration.

    Iterates on whichever of ``X X^T`` / ``X^T X`` is smaller, starting from a
    fixed pseudo-random vector.
    """
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        raise InvalidInputError("X must be non-empty")
    G = X @ X.T if X.shape[0] <= X.shape[1] else X.T @ X
    v = np.random.default_rng(seed).standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iterations):
        u = G @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        new = float(v @ u)
        v = u / nu
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return est


def _check_design(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X must be 2-d")
    if Y.shape[0] != X.shape[0]:
        raise DimensionError(f"y has {Y.shape[0]} rows, X has {X.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise InvalidInputError("X and y must be finite")
    return X, Y


def _check_unit_columns(X, Y):
    norms = np.linalg.norm(X, axis=0)
    # an all-zero column is allowed: it stands for an excluded point
    bad = (np.abs(norms - 1.0) > _UNIT_NORM_TOL) & (norms != 0.0)
    if np.any(bad):
        raise InvalidInputError(f"X column {int(np.argmax(bad))} is not unit norm")
    ynorms = np.linalg.norm(Y.reshape(Y.shape[0], -1), axis=0)
    if np.any(np.abs(ynorms - 1.0) > _UNIT_NORM_TOL):
        raise InvalidInputError("y must have unit norm")


def _objective(X, Y, B, w):
    R = Y - X @ B
    return 0.5 * np.einsum("ij,ij->j", R, R) + w @ sorted_magnitudes(B)


def solve_owl_many(X, Y, w, cfg=None, exclude=None, lipschitz=None, check_unit_norm=True):
    """Solve ``min_b 0.5||y - X b||^2 + Omega_w(b)`` for every column y of Y.

    Parameters
    ----------
    X : ndarray, shape (n, N)
    Y : ndarray, shape (n, m)
    w : ndarray, shape (N,)
    cfg : SolverConfig, optional
    exclude : sequence of int, optional
        ``exclude[c]`` is a coefficient index held at zero for column c (the
        regressed point itself in self-representation).
    lipschitz : float, optional
        Precomputed ``sigma_max(X)**2``.

    Returns
    -------
    list of SolverResult
    """
    cfg = cfg or SolverConfig()
    X, Y = _check_design(X, Y)
    if Y.ndim != 2:
        raise DimensionError("Y must be 2-d")
    w = check_weights(w)
    n, N = X.shape
    m = Y.shape[1]
    if w.shape[0] != N:
        raise DimensionError(f"w has {w.shape[0]} entries, X has {N} columns")
    if check_unit_norm:
        _check_unit_columns(X, Y)
    if exclude is not None:
        exclude = np.asarray(exclude, dtype=np.int64)
        if exclude.shape != (m,):
            raise DimensionError("exclude needs one index per column of Y")
    L = lipschitz_estimate(X) if lipschitz is None else float(lipschitz)

    B = np.zeros((N, m))
    if L == 0.0:
        f0 = _objective(X, Y, B, w)
        return [
            SolverResult(B[:, c].copy(), f0[c : c + 1].copy(), 0, True, float(np.linalg.norm(Y[:, c])))
            for c in range(m)
        ]
    step = 1.0 / L
    w_step = w * step
    cols = np.arange(m)

    f = _objective(X, Y, B, w)
    traces = [[fc] for fc in f]
    iterations = np.zeros(m, dtype=np.int64)
    converged = np.zeros(m, dtype=bool)
    # working state holds only the active columns; finished ones are written back
    active = np.arange(m)
    Ya = Y.copy()
    Ba = B.copy()
    Za = B.copy()
    ta = np.ones(m)
    fa = f.copy()
    ex = exclude.copy() if exclude is not None else None
    tiny = np.finfo(float).tiny

    for _ in range(cfg.max_iterations):
        if active.size == 0:
            break
        V = Za - step * (X.T @ (X @ Za - Ya))
        if ex is not None:
            V[ex, np.arange(active.size)] = 0.0
        Bn, pen = prox_owl_penalty(V, w_step, w)
        R = Ya - X @ Bn
        fn = 0.5 * np.einsum("ij,ij->j", R, R) + pen
        iterations[active] += 1

        if cfg.acceleration:
            restart = fn > fa
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * ta * ta))
            Zn = Bn + ((ta - 1.0) / t_next) * (Bn - Ba)
        else:
            restart = np.zeros(active.size, dtype=bool)
            t_next = ta
            Zn = Bn
        ok = ~restart
        # restarted columns keep their iterate and drop momentum
        if restart.any():
            Zn[:, restart] = Ba[:, restart]
            Bn[:, restart] = Ba[:, restart]
            t_next[restart] = 1.0
            fn = np.where(restart, fa, fn)

        change = np.abs(fa - fn)
        done = ok & (change <= cfg.rel_tolerance * np.maximum(np.abs(fn), tiny))
        # an iterate that did not move at all is a fixed point
        done |= ok & (fn == fa) & np.all(Bn == Ba, axis=0)

        for i, c in enumerate(active):
            traces[c].append(fn[i])
        Ba, Za, ta, fa = Bn, Zn, t_next, fn
        if done.any():
            B[:, active[done]] = Ba[:, done]
            converged[active[done]] = True
            keep = ~done
            active = active[keep]
            Ya, Ba, Za, ta, fa = Ya[:, keep], Ba[:, keep], Za[:, keep], ta[keep], fa[keep]
            if ex is not None:
                ex = ex[keep]
    B[:, active] = Ba

    R = Y - X @ B
    resid = np.linalg.norm(R, axis=0)
    return [
        SolverResult(B[:, c].copy(), np.asarray(traces[c]), int(iterations[c]), bool(converged[c]), float(resid[c]))
        for c in cols
    ]


def solve_owl(X, y, w, cfg=None, lipschitz=None):
    """Solve the OWL-regularized regression ``0.5||y - X b||^2 + Omega_w(b)``.

    ``X`` must have unit-norm columns and ``y`` unit norm. Non-convergence is
    reported through ``SolverResult.converged`` rather than raised.
    """
    X, y = _check_design(X, y)
    if y.ndim != 1:
        raise DimensionError("y must be 1-d")
    return solve_owl_many(X, y[:, None], w, cfg, lipschitz=lipschitz)[0]


def solve_lasso(X, y, lam, cfg=None, lipschitz=None):
    """Lasso ``0.5||y - X b||^2 + lam ||b||_1``; OWL with constant weights."""
    if not lam > 0:
        raise InvalidParameterError(f"lam must be > 0, got {lam}")
    X = np.asarray(X, dtype=float)
    return solve_owl(X, y, np.full(X.shape[1], float(lam)), cfg, lipschitz=lipschitz)


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def solve_basis_pursuit(X, y, cfg=None, feasibility_tol=1e-6):
    """Exact l1 regression ``min ||b||_1 s.t. X b = y`` by ADMM.

    ADMM runs with fixed penalty ``cfg.admm_rho`` and over-relaxation 1.5 and
    stops on primal and dual residuals, or earlier once a polished iterate
    carries a dual certificate of optimality. The final iterate is polished
    by least squares on its support when that keeps the point optimal.

    Raises
    ------
    InfeasibleError
        If y is not in the column span of X.
    """
    cfg = cfg or SolverConfig()
    X, y = _check_design(X, y)
    if y.ndim != 1:
        raise DimensionError("y must be 1-d")
    n, N = X.shape
    pinv = np.linalg.pinv(X)
    x_ls = pinv @ y
    ls_resid = float(np.linalg.norm(X @ x_ls - y))
    if ls_resid >= feasibility_tol:
        raise InfeasibleError(f"y is not in the span of X (least-squares residual {ls_resid:.3e})", ls_resid)
    P = pinv @ X  # projector onto the row space

    rho = cfg.admm_rho
    alpha = _ADMM_OVER_RELAXATION
    x = x_ls.copy()
    z = x_ls.copy()
    u = np.zeros(N)
    trace = []
    converged = False
    beta = None
    last_supp = None
    refuted = set()
    it = 0
    eps = cfg.rel_tolerance
    for it in range(1, cfg.admm_max_iterations + 1):
        # project z - u onto {b : X b = y}
        v = z - u
        x = v - P @ v + x_ls
        x_hat = alpha * x + (1.0 - alpha) * z
        z_old = z
        z = _soft(x_hat + u, 1.0 / rho)
        u = u + x_hat - z
        trace.append(float(np.abs(z).sum()))
        r_norm = np.linalg.norm(x - z)
        s_norm = rho * np.linalg.norm(z - z_old)
        eps_pri = np.sqrt(N) * eps + eps * max(np.linalg.norm(x), np.linalg.norm(z))
        eps_dual = np.sqrt(N) * eps + eps * rho * np.linalg.norm(u)
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break
        if it % _GAP_CHECK_EVERY == 0:
            cand = _polish(X, y, z, pinv)
            supp = cand != 0
            # certificates are only worth trying on a sparse refit whose
            # support has settled
            if supp.sum() <= n and np.array_equal(supp, last_supp) and _certified(X, y, cand, rho * u, eps, refuted):
                beta, converged = cand, True
                break
            last_supp = supp

    if beta is None:
        beta = _polish(X, y, z, pinv)
    return SolverResult(
        beta,
        np.asarray(trace),
        it,
        converged,
        float(np.linalg.norm(y - X @ beta)),
    )


def _certified(X, y, beta, g, tol, refuted=None):
    """True if ``beta`` is a provably optimal basis pursuit solution.

    Two dual points are tried. At an ADMM fixed point the scaled dual
    ``g = rho * u`` lies in the row space of X and in the subdifferential of
    the l1 norm, so ``X^T nu = g`` rescaled into ``||X^T nu||_inf <= 1`` gives
    a lower bound. That bound converges slowly, so the exact certificate
    ``X_S^T nu = sign(beta_S)``, ``|X_j^T nu| <= 1`` off the support, is also
    searched for as a feasibility LP. Sign patterns whose LP came back
    infeasible are added to ``refuted`` and not tried again.
    """
    if np.linalg.norm(X @ beta - y) > 1e-9:
        return False
    primal = np.abs(beta).sum()
    if primal == 0:
        return True

    def gap(nu):
        scale = np.max(np.abs(X.T @ nu))
        return np.inf if scale == 0 else (primal - float(y @ nu) / scale) / primal

    if gap(np.linalg.lstsq(X.T, g, rcond=None)[0]) <= tol:
        return True
    key = np.sign(beta).astype(np.int8).tobytes()
    if refuted is not None and key in refuted:
        return False
    supp = beta != 0
    off = X[:, ~supp].T
    lp = linprog(
        np.zeros(X.shape[0]),
        A_ub=np.vstack([off, -off]),
        b_ub=np.ones(2 * off.shape[0]),
        A_eq=X[:, supp].T,
        b_eq=np.sign(beta[supp]),
        bounds=(None, None),
        method="highs",
    )
    ok = lp.status == 0 and gap(lp.x) <= _CERT_TOL
    if not ok and refuted is not None:
        refuted.add(key)
    return ok


def _polish(X, y, z, pinv=None):
    """Least-squares refit of ``z`` on a small support if it stays feasible,
    keeps the signs of ``z`` and is no worse in l1; otherwise project ``z``
    onto the constraint set.

    The support tried first is that of ``z``; when it has more than n entries
    the n largest magnitudes are used instead (a vertex candidate).
    """
    n = X.shape[0]
    supp = support_mask(z)
    if supp.sum() > n:
        supp = np.zeros(z.size, dtype=bool)
        supp[np.argsort(-np.abs(z), kind="stable")[:n]] = True
    if pinv is None:
        pinv = np.linalg.pinv(X)
    proj = z - pinv @ (X @ z - y)
    if supp.any():
        coef, *_ = np.linalg.lstsq(X[:, supp], y, rcond=None)
        cand = np.zeros_like(z)
        cand[supp] = coef
        # compare against the feasible projection, not z itself: an
        # unconverged z can undercut the optimum in l1
        if (
            np.linalg.norm(X @ cand - y) <= 1e-10
            and np.all(np.sign(coef) == np.sign(z[supp]))
            and np.abs(cand).sum() <= np.abs(proj).sum() + 1e-9
        ):
            cand[~support_mask(cand)] = 0.0
            return cand
    return proj


def solve_basis_pursuit_many(X, Y, cfg=None, exclude=None):
    """Exact l1 self-representation: one basis pursuit per column of Y.

    A column whose problem is infeasible is returned zero-filled with
    ``failed=True``.
    """
    X, Y = _check_design(X, Y)
    results = []
    for c in range(Y.shape[1]):
        Xc = X
        if exclude is not None:
            Xc = X.copy()
            Xc[:, exclude[c]] = 0.0
        try:
            res = solve_basis_pursuit(Xc, Y[:, c], cfg)
            if exclude is not None:
                res.beta[exclude[c]] = 0.0
            results.append(res)
        except InfeasibleError as err:
            results.append(
                SolverResult(np.zeros(X.shape[1]), np.zeros(0), 0, False, float(np.linalg.norm(Y[:, c])), True, str(err))
            )
    return results
