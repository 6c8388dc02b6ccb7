import csv
import os

import numpy as np
import pytest
from scipy import stats

from owlsc.exceptions import InvalidParameterError, OutputError
from owlsc.experiments import (
    CSV_FIELDS,
    ROC_DELTAS,
    ROC_LAMBDAS,
    CoefficientCache,
    RocPoint,
    SweepCell,
    SweepResult,
    _DATA,
    _rep_seed,
    affinity_sweep,
    csv_export,
    csv_import,
    default_lambda,
    default_methods,
    default_ramp,
    envelope_tpr,
    error_vs_k,
    noise_sweep,
    real_data_ramp,
    rho_sweep,
    roc_csv_export,
    roc_envelope,
    roc_sweep,
    smallest_k,
    write_csv_atomic,
)
from owlsc.geometry import generate_b1, generate_b2, generate_orthogonal, sample_union
from owlsc.pipeline import Lasso


@pytest.fixture(scope="module")
def small_b1():
    return sample_union(generate_b1(3, 5, 15, seed=3), rho=5, seed=3)


@pytest.fixture(scope="module")
def orthogonal():
    return sample_union(generate_orthogonal(3, 5, seed=0), counts=30, seed=0)


# -- defaults ------------------------------------------------------------------

def test_default_lambda_scales_with_dimension():
    assert default_lambda(4) == pytest.approx(2 * default_lambda(16))


def test_default_ramp_b1_shape():
    ramp = default_ramp(300, 3, 20)
    assert ramp.r == 100
    assert ramp.w1 == pytest.approx(2 * default_lambda(20))


def test_roc_grid_matches_stated_ranges():
    assert ROC_LAMBDAS[0] == pytest.approx(1e-3) and ROC_LAMBDAS[-1] == pytest.approx(2.0)
    assert np.all(np.diff(np.log(ROC_LAMBDAS)) == pytest.approx(np.log(ROC_LAMBDAS[1] / ROC_LAMBDAS[0])))
    assert ROC_DELTAS == (0.0, 0.005, 0.01, 0.02, 0.05)


def test_real_data_ramp_picks_first_nontrivial(small_b1):
    X = small_b1.X
    N = X.shape[1]
    ramp, ok = real_data_ramp(X, 0.01)
    assert ok
    assert ramp.r == round(N / 4)
    assert ramp.w1 == pytest.approx(0.02)


def test_real_data_ramp_reports_trivial(small_b1):
    ramp, ok = real_data_ramp(small_b1.X, 10.0)
    assert not ok
    assert ramp.w1 == pytest.approx(20.0)


# -- ROC -------------------------------------------------------------------------

def test_roc_limits_and_exact_point(small_b1):
    pts = roc_sweep(small_b1, lambdas=[1e3, 0.01], deltas=[0.0, 0.001], n_points=20, seed=0)
    huge = [p for p in pts if p.lam == 1e3]
    assert all(p.fpr == 0 and p.tpr == 0 for p in huge)
    exact = [p for p in pts if p.method == "exact_l1"]
    assert len(exact) == 1
    assert len(pts) == 2 * 2 + 1
    assert all(0 <= p.fpr <= 1 and 0 <= p.tpr <= 1 for p in pts)


def test_roc_replay_identical(small_b1):
    a = roc_sweep(small_b1, lambdas=[0.01], deltas=[0.0, 0.002], n_points=10, replications=2, seed=5)
    b = roc_sweep(small_b1, lambdas=[0.01], deltas=[0.0, 0.002], n_points=10, replications=2, seed=5)
    assert a == b


def test_envelope_nondecreasing():
    rng = np.random.default_rng(0)
    pts = [RocPoint("owl", 0.1, 0.01, *rng.uniform(size=2)) for _ in range(30)]
    f, t = roc_envelope(pts)
    assert np.all(np.diff(f) >= 0)
    assert np.all(np.diff(t) >= 0)
    assert f[0] == 0 and t[0] == 0
    assert envelope_tpr(pts, 1.0) == pytest.approx(max(p.tpr for p in pts))


def test_envelope_filters_method():
    pts = [RocPoint("owl", 0, 0, 0.1, 0.5), RocPoint("lasso", 0, 0, 0.1, 0.2)]
    assert envelope_tpr(pts, 0.1, "lasso") == pytest.approx(0.2)
    assert envelope_tpr(pts, 0.05, "owl") == pytest.approx(0.25)


# -- error vs k ------------------------------------------------------------------

def test_orthogonal_full_k_owl_exact(orthogonal):
    N = orthogonal.X.shape[1]
    res = error_vs_k(orthogonal, {"owl": default_methods(orthogonal)["owl"]}, [N], replications=3, seed=0)
    assert res.get("owl", k=N).mean == 0.0


def test_single_replication_zero_std(small_b1):
    res = error_vs_k(small_b1, k_grid=[10, 30], replications=1, seed=0)
    assert all(c.std == 0.0 and c.replications == 1 for c in res.cells)


def test_error_vs_k_validates(small_b1):
    with pytest.raises(InvalidParameterError):
        error_vs_k(small_b1, k_grid=[0])
    with pytest.raises(InvalidParameterError):
        error_vs_k(small_b1, k_grid=[10], replications=0)


def test_error_vs_k_seed_order_independent(small_b1):
    a = error_vs_k(small_b1, k_grid=[10, 30], replications=3, seed=4)
    b = error_vs_k(small_b1, k_grid=[30, 10], replications=3, seed=4)
    for c in a.cells:
        assert b.get(c.method, k=c.coords[0]).values == c.values


def test_smallest_k():
    res = SweepResult(("k",), [SweepCell((k,), "owl", m, 0, 1, 0) for k, m in [(5, 0.3), (10, 0.005), (20, 0.0)]])
    assert smallest_k(res, "owl") == 10
    assert smallest_k(res, "owl", threshold=0.0) == 20
    assert smallest_k(res, "owl", threshold=-1) is None


def test_cache_solves_each_column_once(small_b1):
    cache = CoefficientCache(small_b1.X, Lasso(0.01))
    a = cache.get([0, 1, 2])
    first = cache.results[1]
    b = cache.get([1, 2, 3])
    assert cache.results[1] is first
    np.testing.assert_array_equal(a.B[:, 1], b.B[:, 1])
    assert np.all(b.B[:, 0] == 0)


# -- affinity / density / noise --------------------------------------------------------

def test_one_by_one_affinity_grid_is_error_vs_k():
    seed, a, k = 3, 0.8, 20
    res = affinity_sweep([a], [k], methods=default_methods, d=5, rho=4, replications=3, seed=seed)
    union = sample_union(generate_b2(5, target_affinity=a), rho=4, seed=_rep_seed(seed, _DATA))
    ref = error_vs_k(union, default_methods(union), [k], replications=3, seed=seed)
    for c in ref.cells:
        assert res.get(c.method, alpha=a, k=k).values == c.values


def test_rho_trend_at_equal_seed_fraction():
    # at a fixed share of seed regressions, a denser union clusters better
    res = rho_sweep([2, 10], [6, 30], methods=default_methods, L=3, d=5, n=15, replications=10, seed=1)
    assert res.get("owl", rho=10, k=30).mean <= res.get("owl", rho=2, k=6).mean


def test_rho_sweep_skips_k_above_n():
    res = rho_sweep([2], [6, 1000], methods=default_methods, L=3, d=5, n=15, replications=1, seed=1)
    assert {c.coords[1] for c in res.cells} == {6}


def test_noise_zero_column_is_error_vs_k(small_b1):
    res = noise_sweep(small_b1, [0.0, 0.2], [10], replications=3, seed=2)
    ref = error_vs_k(small_b1, k_grid=[10], replications=3, seed=2)
    for c in ref.cells:
        assert res.get(c.method, sigma=0.0, k=10).values == c.values


def test_noise_rejects_negative(small_b1):
    with pytest.raises(InvalidParameterError):
        noise_sweep(small_b1, [-0.1], [10])


def test_noise_error_trend(small_b1):
    sigmas = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    res = noise_sweep(small_b1, sigmas, [10], replications=10, seed=2)
    for m in res.methods():
        x, y = res.curve(m, "sigma", k=10)
        assert stats.spearmanr(x, y).statistic > 0
        assert np.all((y >= 0) & (y <= 1))


# -- CSV -----------------------------------------------------------------------

def _sweep():
    rng = np.random.default_rng(0)
    res = SweepResult(("sigma", "k"))
    for s in (0.0, 0.1):
        for k in (3, 10, 30):
            for m in ("lasso",):
                res.cells.append(SweepCell((s, k), m, rng.uniform() / 3, rng.uniform() / 7, 10, 99))
    return res


def test_csv_round_trip_bit_exact(tmp_path):
    res = _sweep()
    path = tmp_path / "s.csv"
    csv_export(res, path)
    back = csv_import(path)
    assert back.axes == res.axes
    for a, b in zip(res.cells, back.cells):
        assert a.coords == b.coords and a.method == b.method
        assert a.mean == b.mean and a.std == b.std
        assert (a.replications, a.seed) == (b.replications, b.seed)


def test_csv_row_count_and_header(tmp_path):
    path = tmp_path / "s.csv"
    csv_export(_sweep(), path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["sigma", "k", *CSV_FIELDS]
    assert len(rows) == 1 + 6
    assert open(path, "rb").read().count(b"\r\n") == 7


def test_csv_empty_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    csv_export(SweepResult(("k",)), path)
    assert open(path, newline="").read() == "k,method,mean,std,replications,seed\r\n"


def test_csv_io_error_names_path(tmp_path):
    bad = tmp_path / "missing" / "s.csv"
    with pytest.raises(OutputError) as exc:
        csv_export(_sweep(), bad)
    assert str(bad) in str(exc.value)


def test_atomic_write_leaves_no_partial_file(tmp_path):
    path = tmp_path / "a.csv"

    def rows():
        yield ["1"]
        raise RuntimeError("interrupted")

    with pytest.raises(RuntimeError):
        write_csv_atomic(path, ["x"], rows())
    assert os.listdir(tmp_path) == []


def test_roc_csv(tmp_path):
    path = tmp_path / "roc.csv"
    roc_csv_export([RocPoint("owl", 0.1, 0.01, 1 / 3, 2 / 3)], path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["method", "lambda", "delta", "fpr", "tpr"]
    assert float(rows[1][3]) == 1 / 3
