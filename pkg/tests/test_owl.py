import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from owlsc.exceptions import DimensionError, InvalidInputError, InvalidParameterError
from owlsc.oracles import prox_owl_bruteforce
from owlsc.owl import (
    RampParams,
    check_weights,
    make_ramp_weights,
    min_gap,
    oscar_weights,
    owl_dual_norm,
    owl_norm,
    predict_trivial_solution,
    prox_owl,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def vec_and_weights(draw, max_n=5):
    n = draw(st.integers(1, max_n))
    v = draw(arrays(float, n, elements=finite))
    w = draw(arrays(float, n, elements=st.floats(0, 5, allow_nan=False)))
    w = -np.sort(-w)
    w[0] = max(w[0], 1e-3)
    return v, w


def objective(x, v, w):
    return 0.5 * np.sum((x - v) ** 2) + owl_norm(x, w)


# -- weights -----------------------------------------------------------------

def test_ramp_weights_example():
    assert make_ramp_weights(RampParams(1.0, 0.5, 2), 4).tolist() == [2.0, 1.5, 1.0, 1.0]


def test_ramp_zero_slope_is_l1():
    assert make_ramp_weights(RampParams(1.0, 0.0, 3), 3).tolist() == [1.0, 1.0, 1.0]


@pytest.mark.parametrize("lam,delta,r", [(0.0, 0.1, 2), (-1.0, 0.1, 2), (1.0, -0.1, 2), (1.0, 0.1, 0)])
def test_ramp_params_invalid(lam, delta, r):
    with pytest.raises(InvalidParameterError):
        RampParams(lam, delta, r)


def test_ramp_longer_than_n():
    with pytest.raises(InvalidParameterError):
        make_ramp_weights(RampParams(1.0, 0.1, 5), 4)


def test_ramp_w1():
    p = RampParams(0.2, 0.01, 30)
    assert p.w1 == pytest.approx(0.2 + 30 * 0.01)
    assert p.weights(40)[0] == pytest.approx(p.w1)


def test_oscar_is_full_ramp():
    w = oscar_weights(1.0, 0.5, 4)
    assert w.tolist() == [3.0, 2.5, 2.0, 1.5]
    assert min_gap(w) == pytest.approx(0.5)


@pytest.mark.parametrize("w", [[1, 2], [0, 0], [1, -1], [np.nan, 1]])
def test_check_weights_rejects(w):
    with pytest.raises((InvalidParameterError, InvalidInputError)):
        check_weights(np.array(w, dtype=float))


# -- norm / dual norm / gap ----------------------------------------------------

@pytest.mark.parametrize(
    "beta,w,expected",
    [([3, -1, 2], [1, 1, 1], 6), ([3, -1, 2], [1, 0, 0], 3), ([-1, 2, 3], [3, 2, 1], 14)],
)
def test_owl_norm_examples(beta, w, expected):
    assert owl_norm(np.array(beta, float), np.array(w, float)) == pytest.approx(expected)


@pytest.mark.parametrize("beta,w,expected", [([2, -1], [2, 2], 1), ([3, 3], [2, 1], 2), ([0, 0], [2, 1], 0)])
def test_dual_norm_examples(beta, w, expected):
    assert owl_dual_norm(np.array(beta, float), np.array(w, float)) == pytest.approx(expected)


def test_norm_length_mismatch():
    with pytest.raises(DimensionError):
        owl_norm(np.ones(3), np.ones(2))
    with pytest.raises(DimensionError):
        owl_dual_norm(np.ones(3), np.ones(2))


@pytest.mark.parametrize("w,expected", [([3, 2, 1], 1), ([1, 1, 1], 0), ([2, 1.5, 1, 1], 0)])
def test_min_gap_examples(w, expected):
    assert min_gap(np.array(w, float)) == pytest.approx(expected)


def test_min_gap_needs_two():
    with pytest.raises(InvalidInputError):
        min_gap(np.array([1.0]))


def test_dual_norm_matches_lp_definition():
    # dual of OWL is max over the unit ball; the ball's extreme points are
    # signed permutations of (1/(w1+..+wi)) * (1,..,1,0,..)
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = 4
        b = rng.standard_normal(n)
        w = -np.sort(-rng.exponential(size=n))
        best = 0.0
        for i in range(1, n + 1):
            for S in itertools.combinations(range(n), i):
                best = max(best, np.sum(np.abs(b[list(S)])) / w[:i].sum())
        assert owl_dual_norm(b, w) == pytest.approx(best)


@settings(max_examples=200, deadline=None)
@given(vec_and_weights(8), arrays(float, 8, elements=finite), st.floats(-3, 3))
def test_norm_axioms(vw, other, c):
    v, w = vw
    u = other[: v.size]
    assert owl_norm(v, w) >= 0
    assert owl_norm(c * v, w) == pytest.approx(abs(c) * owl_norm(v, w), rel=1e-9, abs=1e-9)
    assert owl_norm(v + u, w) <= owl_norm(v, w) + owl_norm(u, w) + 1e-9
    if not np.any(v):
        assert owl_norm(v, w) == 0


@settings(max_examples=200, deadline=None)
@given(vec_and_weights(8), arrays(float, 8, elements=finite))
def test_dual_sandwich_and_holder(vw, other):
    b, w = vw
    a = other[: b.size]
    inf = np.max(np.abs(b))
    dual = owl_dual_norm(b, w)
    assert inf / w[0] <= dual * (1 + 1e-12) + 1e-12
    if w.mean() > 0:
        assert dual <= inf / w.mean() * (1 + 1e-12) + 1e-12
    assert abs(a @ b) <= owl_norm(a, w) * dual * (1 + 1e-9) + 1e-9


def test_column_batches():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((5, 7))
    w = np.array([3, 2, 2, 1, 0.5])
    np.testing.assert_allclose(owl_norm(B, w), [owl_norm(B[:, j], w) for j in range(7)])
    np.testing.assert_allclose(owl_dual_norm(B, w), [owl_dual_norm(B[:, j], w) for j in range(7)])


def test_predict_trivial():
    w = np.array([2.0, 1.0, 1.0])
    assert predict_trivial_solution(np.zeros(3), w)
    assert predict_trivial_solution(np.array([0.3, -0.2, 0.1]), 1e6 * w)
    assert not predict_trivial_solution(np.array([5.0, 0.0, 0.0]), w)


# -- prox --------------------------------------------------------------------

def test_prox_equal_weights_soft_threshold():
    np.testing.assert_allclose(prox_owl(np.array([3.0, -1.0]), np.array([1.0, 1.0])), [2.0, 0.0])


def test_prox_kills_small_vector():
    x = prox_owl(np.array([2.0, 1.0]), np.array([2.0, 1.0]))
    np.testing.assert_allclose(x, [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(prox_owl_bruteforce([2.0, 1.0], [2.0, 1.0]), [0.0, 0.0], atol=1e-12)


def test_prox_pools_violating_pair():
    v, w = np.array([3.0, 2.9]), np.array([2.0, 1.0])
    x = prox_owl(v, w)
    assert abs(abs(x[0]) - abs(x[1])) <= 1e-6
    np.testing.assert_allclose(x, prox_owl_bruteforce(v, w), atol=1e-6)
    np.testing.assert_allclose(x, [1.45, 1.45])


def test_prox_linf_special_case():
    # w = (c, 0, ..., 0): prox of c*||.||_inf is v minus its projection onto
    # the l1 ball of radius c
    v = np.array([3.0, -2.0, 0.5])
    x = prox_owl(v, np.array([2.0, 0.0, 0.0]))
    np.testing.assert_allclose(x, [1.5, -1.5, 0.5])


def test_prox_length_mismatch():
    with pytest.raises(DimensionError):
        prox_owl(np.ones(3), np.ones(2))


def test_prox_no_negative_zero():
    x = prox_owl(np.array([-0.1, 0.2]), np.array([1.0, 1.0]))
    assert not np.any(np.signbit(x))


@settings(max_examples=300, deadline=None)
@given(vec_and_weights(5))
def test_prox_matches_bruteforce(vw):
    v, w = vw
    np.testing.assert_allclose(prox_owl(v, w), prox_owl_bruteforce(v, w), atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(vec_and_weights(12), st.randoms(use_true_random=False))
def test_prox_optimality_under_perturbation(vw, rnd):
    v, w = vw
    x = prox_owl(v, w)
    rng = np.random.default_rng(rnd.randint(0, 2**31))
    f0 = objective(x, v, w)
    for scale in (1e-1, 1e-3, 1e-6):
        P = x[:, None] + scale * rng.standard_normal((v.size, 10))
        assert np.all(f0 <= np.array([objective(P[:, i], v, w) for i in range(10)]) + 1e-12)


@settings(max_examples=100, deadline=None)
@given(vec_and_weights(10), st.permutations(range(10)))
def test_prox_sign_and_permutation_equivariance(vw, perm):
    v, w = vw
    p = np.array([i for i in perm if i < v.size])
    x = prox_owl(v, w)
    np.testing.assert_allclose(prox_owl(v[p], w), x[p], atol=1e-12)
    np.testing.assert_allclose(prox_owl(-v, w), -x, atol=1e-12)
    assert np.all(x * v >= 0)
    assert np.all(np.abs(x) <= np.abs(v) + 1e-12)


def test_prox_batched_columns_match():
    rng = np.random.default_rng(3)
    V = rng.standard_normal((6, 9))
    w = -np.sort(-rng.exponential(size=6))
    X = prox_owl(V, w)
    for j in range(9):
        np.testing.assert_array_equal(X[:, j], prox_owl(V[:, j], w))


def test_prox_deterministic_under_ties():
    v = np.array([1.0, -1.0, 1.0, 0.5])
    w = np.array([0.4, 0.3, 0.2, 0.1])
    a = prox_owl(v, w)
    b = prox_owl(v.copy(), w.copy())
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(a, prox_owl_bruteforce(v, w), atol=1e-12)
