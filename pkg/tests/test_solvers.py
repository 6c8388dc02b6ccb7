import cvxpy as cp
import numpy as np
import pytest

from owlsc.exceptions import DimensionError, InfeasibleError, InvalidInputError, InvalidParameterError
from owlsc.owl import RampParams, owl_dual_norm, owl_norm, predict_trivial_solution, prox_owl
from owlsc.solvers import (
    SolverConfig,
    lipschitz_estimate,
    solve_basis_pursuit,
    solve_basis_pursuit_many,
    solve_lasso,
    solve_owl,
    solve_owl_many,
    support_mask,
)

TIGHT = SolverConfig(max_iterations=200000, rel_tolerance=1e-15)


def unit(A):
    return A / np.linalg.norm(A, axis=0)


def instance(n, N, seed):
    rng = np.random.default_rng(seed)
    X = unit(rng.standard_normal((n, N)))
    y = rng.standard_normal(n)
    return X, y / np.linalg.norm(y)


def cvx_owl(X, y, w):
    """OWL regression via the sum-of-largest-entries representation:
    Omega_w(b) = sum_i (w_i - w_{i+1}) * (sum of the i largest |b|)."""
    N = X.shape[1]
    b = cp.Variable(N)
    dw = np.append(w[:-1] - w[1:], w[-1])
    pen = sum(dw[i] * cp.sum_largest(cp.abs(b), i + 1) for i in range(N) if dw[i] > 0)
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(y - X @ b) + pen))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return b.value, prob.value


def objective(X, y, b, w):
    return 0.5 * np.sum((y - X @ b) ** 2) + owl_norm(b, w)


# -- Lipschitz ---------------------------------------------------------------

def test_lipschitz_identity():
    assert lipschitz_estimate(np.eye(5)) == pytest.approx(1.0)


def test_lipschitz_repeated_column():
    x = unit(np.array([[1.0], [2.0], [2.0]]))
    assert lipschitz_estimate(np.hstack([x, x])) == pytest.approx(2.0)


def test_lipschitz_zero_matrix():
    assert lipschitz_estimate(np.zeros((3, 4))) == 0.0


def test_lipschitz_matches_svd():
    X = np.random.default_rng(0).standard_normal((10, 20))
    assert abs(lipschitz_estimate(X) - np.linalg.norm(X, 2) ** 2) <= 1e-4


# -- OWL / Lasso -------------------------------------------------------------

def test_identity_design_soft_thresholds():
    y = np.array([0.8, -0.5, 0.3, 0.1])
    y /= np.linalg.norm(y)
    res = solve_lasso(np.eye(4), y, 0.2, TIGHT)
    np.testing.assert_allclose(res.beta, np.sign(y) * np.maximum(np.abs(y) - 0.2, 0), atol=1e-10)


def test_lasso_deactivation_threshold():
    X, y = instance(8, 12, 1)
    lam = np.max(np.abs(X.T @ y)) * 1.0001
    assert np.all(solve_lasso(X, y, lam).beta == 0)


def test_lasso_bit_identical_to_constant_owl():
    X, y = instance(10, 30, 2)
    a = solve_lasso(X, y, 0.05)
    b = solve_owl(X, y, np.full(30, 0.05))
    np.testing.assert_array_equal(a.beta, b.beta)
    assert a.iterations == b.iterations


def test_lasso_rejects_nonpositive_lambda():
    X, y = instance(4, 5, 0)
    with pytest.raises(InvalidParameterError):
        solve_lasso(X, y, 0.0)


def test_dual_certificate_gives_zero():
    X, y = instance(6, 10, 3)
    w = RampParams(0.3, 0.05, 5).weights(10)
    # scale the weights so the dual norm of X^T y sits just below 1
    w = w * owl_dual_norm(X.T @ y, w) * 1.001
    assert predict_trivial_solution(X.T @ y, w)
    assert np.max(np.abs(solve_owl(X, y, w).beta)) <= 1e-8


def test_trivial_prediction_agrees_with_solver():
    rng = np.random.default_rng(4)
    agree = 0
    for t in range(40):
        X, y = instance(6, 10, 100 + t)
        w = RampParams(rng.uniform(0.05, 0.6), rng.uniform(0, 0.05), 5).weights(10)
        pred = predict_trivial_solution(X.T @ y, w)
        zero = np.max(np.abs(solve_owl(X, y, w, TIGHT).beta)) < 1e-8
        agree += pred == zero
    assert agree == 40


@pytest.mark.parametrize("seed", range(5))
def test_owl_matches_cvxpy(seed):
    X, y = instance(6, 8, seed)
    w = RampParams(0.05, 0.01, 6).weights(8)
    res = solve_owl(X, y, w, TIGHT)
    _, ref = cvx_owl(X, y, w)
    assert res.converged
    assert abs(objective(X, y, res.beta, w) - ref) <= 1e-6


def test_owl_matches_cvxpy_larger():
    X, y = instance(20, 60, 11)
    w = RampParams(0.02, 0.001, 20).weights(60)
    res = solve_owl(X, y, w, TIGHT)
    _, ref = cvx_owl(X, y, w)
    assert abs(objective(X, y, res.beta, w) - ref) <= 1e-6 * max(1.0, ref)


def test_fixed_point_at_convergence():
    X, y = instance(10, 25, 5)
    w = RampParams(0.05, 0.002, 10).weights(25)
    res = solve_owl(X, y, w, TIGHT)
    L = lipschitz_estimate(X)
    b = res.beta
    step = prox_owl(b - X.T @ (X @ b - y) / L, w / L)
    np.testing.assert_allclose(step, b, atol=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_plain_gradient_objective_monotone(seed):
    X, y = instance(8, 15, 200 + seed)
    w = RampParams(0.05, 0.01, 5).weights(15)
    res = solve_owl(X, y, w, SolverConfig(max_iterations=300, acceleration=False))
    tr = res.objective_trace
    assert np.all(np.diff(tr) <= 1e-12 * np.abs(tr[:-1]))


def test_converged_flag_and_tolerance():
    X, y = instance(8, 15, 6)
    w = RampParams(0.05, 0.01, 5).weights(15)
    res = solve_owl(X, y, w, SolverConfig(max_iterations=5000, rel_tolerance=1e-9, acceleration=False))
    assert res.converged
    tr = res.objective_trace
    assert abs(tr[-1] - tr[-2]) <= 1e-9 * abs(tr[-1])
    assert not solve_owl(X, y, w, SolverConfig(max_iterations=2, rel_tolerance=1e-14)).converged


def test_residual_norm_reported():
    X, y = instance(8, 15, 7)
    res = solve_lasso(X, y, 0.05)
    assert res.residual_norm == pytest.approx(np.linalg.norm(y - X @ res.beta))


def test_rejects_bad_inputs():
    X, y = instance(4, 6, 0)
    w = np.full(6, 0.1)
    with pytest.raises(InvalidInputError):
        solve_owl(X * 2, y, w)
    with pytest.raises(InvalidInputError):
        solve_owl(X, y * 2, w)
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(InvalidInputError):
        solve_owl(bad, y, w)
    with pytest.raises(DimensionError):
        solve_owl(X, y[:3], w)


def test_many_matches_single_and_excludes():
    X, _ = instance(10, 20, 8)
    w = RampParams(0.05, 0.002, 10).weights(20)
    cols = [0, 3, 7]
    res = solve_owl_many(X, X[:, cols], w, TIGHT, exclude=cols)
    for c, r in zip(cols, res):
        assert r.beta[c] == 0.0
        Z = X.copy()
        Z[:, c] = 0.0
        single = solve_owl_many(Z, X[:, [c]], w, TIGHT)[0]
        assert objective(X, X[:, c], r.beta, w) == pytest.approx(objective(Z, X[:, c], single.beta, w), abs=1e-10)


def test_support_mask_threshold():
    b = np.array([1.0, 5e-7, 2e-6, 0.0])
    assert support_mask(b).tolist() == [True, False, True, False]
    assert support_mask(np.array([100.0, 5e-5])).tolist() == [True, False]


# -- basis pursuit -----------------------------------------------------------

def test_bp_identity():
    y = np.array([0.6, -0.8, 0.0])
    res = solve_basis_pursuit(np.eye(3), y)
    np.testing.assert_allclose(res.beta, y, atol=1e-9)


def test_bp_infeasible_names_residual():
    X = unit(np.array([[1.0, 1.0], [0.0, 0.5], [0.0, 0.0]]))
    with pytest.raises(InfeasibleError) as exc:
        solve_basis_pursuit(X, np.array([0.0, 0.0, 1.0]))
    assert exc.value.residual == pytest.approx(1.0)
    assert "residual" in str(exc.value)


@pytest.mark.parametrize("seed", range(5))
def test_bp_matches_cvxpy(seed):
    X, y = instance(5, 10, 50 + seed)
    res = solve_basis_pursuit(X, y)
    b = cp.Variable(10)
    prob = cp.Problem(cp.Minimize(cp.norm1(b)), [X @ b == y])
    prob.solve(solver=cp.CLARABEL)
    assert np.linalg.norm(y - X @ res.beta) <= 1e-6
    assert abs(np.abs(res.beta).sum() - prob.value) <= 1e-5


@pytest.mark.parametrize("seed", range(3))
def test_bp_is_lasso_limit(seed):
    # as lambda -> 0 the Lasso solution tends to the basis pursuit solution
    X, y = instance(5, 10, 80 + seed)
    bp = solve_basis_pursuit(X, y)
    las = solve_lasso(X, y, 1e-6, SolverConfig(max_iterations=500000, rel_tolerance=1e-16))
    assert support_mask(bp.beta).tolist() == (np.abs(las.beta) > 1e-4).tolist()
    np.testing.assert_allclose(las.beta, bp.beta, atol=1e-4)


def test_bp_many_excludes_and_fails_softly():
    X, _ = instance(5, 12, 9)
    res = solve_basis_pursuit_many(X, X[:, [2, 4]], exclude=[2, 4])
    for c, r in zip([2, 4], res):
        assert not r.failed
        assert r.beta[c] == 0.0
        assert np.linalg.norm(X[:, c] - X @ r.beta) <= 1e-6
    # a point outside the span of the others
    Z = np.zeros((3, 3))
    Z[0, 0] = Z[1, 1] = Z[2, 2] = 1.0
    r = solve_basis_pursuit_many(Z, Z[:, [0]], exclude=[0])[0]
    assert r.failed and np.all(r.beta == 0)


def test_bp_default_config_sparse_on_union():
    # points on a 20-dim subspace: the optimum is a 20-sparse vertex, which the
    # dual certificate must recognise well before the iteration cap
    from owlsc.geometry import generate_b1, sample_union

    u = sample_union(generate_b1(seed=42), rho=5, seed=42)
    X = u.X
    for c in (0, 3, 6):
        r = solve_basis_pursuit_many(X, X[:, [c]], exclude=[c])[0]
        Z = X.copy()
        Z[:, c] = 0.0
        b = cp.Variable(X.shape[1])
        prob = cp.Problem(cp.Minimize(cp.norm1(b)), [Z @ b == X[:, c]])
        prob.solve(solver=cp.CLARABEL)
        assert r.converged
        assert support_mask(r.beta).sum() <= X.shape[0]
        assert abs(np.abs(r.beta).sum() - prob.value) <= 1e-5


def test_admm_iteration_cap_validated():
    with pytest.raises(InvalidParameterError):
        SolverConfig(admm_max_iterations=0)
    X, y = instance(5, 10, 60)
    assert solve_basis_pursuit(X, y, SolverConfig(admm_max_iterations=3)).iterations <= 3
