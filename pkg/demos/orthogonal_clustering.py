"""
Clustering orthogonal subspaces
===============================

On mutually orthogonal subspaces OWL regression never reaches across
subspaces, so OSC recovers the labels exactly. Greedy peeling goes further:
one regression with near-l_inf weights captures (almost) a whole subspace,
so L regressions suffice.
"""
import numpy as np

from owlsc import OscConfig, OwlRamp, generate_orthogonal, run_osc, sample_union
from owlsc.experiments import default_ramp
from owlsc.pipeline import greedy_peel

union = sample_union(generate_orthogonal(L=3, d=5, n=15, seed=1), counts=50, seed=1)
X, truth = union.X, union.labels
N = X.shape[1]
print(f"{N} points on 3 orthogonal 5-dim subspaces of R^15")

###############################################################################
# OSC with a regression for every point.

cfg = OscConfig(k=N, regularizer=OwlRamp(default_ramp(N, 3, 5)), num_clusters=3, seed=1)
res = run_osc(X, cfg, truth)
B = np.abs(res.coefficients.B)
cross = truth[:, None] != truth[None, :]
print(f"clustering error {res.clustering_error:g}, cross-subspace mass {B[cross].sum():.1e}")

###############################################################################
# Only a tenth of the points regressed: still exact here, because each
# regression links many same-subspace points at once.

cfg_small = OscConfig(k=N // 10, regularizer=cfg.regularizer, num_clusters=3, seed=1)
print(f"k = {N // 10}: error {run_osc(X, cfg_small, truth).clustering_error:g}")

###############################################################################
# Greedy peeling: one solve per subspace.

peel = greedy_peel(X, seed=1)
print(f"peeling found {peel.n_clusters} clusters in {peel.rounds} regressions")
