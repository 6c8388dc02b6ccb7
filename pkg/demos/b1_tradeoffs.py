"""
Lasso and OWL on random subspaces
=================================

Random 20-dimensional subspaces of R^40 overlap substantially (mean
affinity near 0.7). This script measures the false/true discovery trade-off
of single regressions and the clustering error as a function of the number
of seed regressions k. It takes about a minute.
"""
import numpy as np

from owlsc import generate_b1, sample_union
from owlsc.experiments import error_vs_k, roc_sweep, smallest_k

union = sample_union(generate_b1(L=3, d=20, n=40, seed=42), rho=5, seed=42)
print(f"N = {union.X.shape[1]} points")

###############################################################################
# Trade-off points over a small (lambda, delta) grid. ``delta = 0`` is the
# Lasso; exact l1 adds one point.

pts = roc_sweep(union, lambdas=[0.003, 0.03, 0.3], deltas=[0.0, 0.0002, 0.001], n_points=30, seed=0)
print(f"{'method':9s} {'lambda':>7s} {'delta':>7s} {'FPR':>6s} {'TPR':>6s}")
for p in pts:
    print(f"{p.method:9s} {p.lam:7.3f} {p.delta:7.4f} {p.fpr:6.3f} {p.tpr:6.3f}")

###############################################################################
# Clustering error against k, ten replications per cell.

res = error_vs_k(union, k_grid=[10, 30, 75, 150], replications=10, seed=0)
for m in res.methods():
    ks, means = res.curve(m)
    print(m, "  ".join(f"k={k}: {e:.3f}" for k, e in zip(ks, means)), "| error <= 0.01 from k =", smallest_k(res, m))
