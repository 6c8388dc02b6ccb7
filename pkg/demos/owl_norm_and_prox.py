"""
The OWL norm and its proximal operator
======================================

OWL weights sit between the l1 norm (all weights equal) and the l_inf norm
(one nonzero weight). This walk-through shows what the prox does to a vector
under a few weight profiles, and why strongly decreasing weights pull
coefficients of similar size onto a common value.
"""
import numpy as np

from owlsc import RampParams, make_ramp_weights, owl_norm, owl_dual_norm, prox_owl

np.set_printoptions(precision=3, suppress=True)

v = np.array([3.0, 2.9, -2.0, 0.5, 0.1])

###############################################################################
# Equal weights: the prox is plain soft thresholding.

w_l1 = np.full(5, 0.5)
print("l1 weights      ", w_l1, "->", prox_owl(v, w_l1))

###############################################################################
# A ramp. The first r weights decrease by ``delta`` and the rest equal
# ``lam``. The two leading entries (3.0 and 2.9) differ by less than the
# weight gap, so their shrunken values are pooled to the same magnitude.

ramp = RampParams(lam=0.5, delta=0.3, r=3)
w_ramp = make_ramp_weights(ramp, 5)
print("ramp weights    ", w_ramp, "->", prox_owl(v, w_ramp))

###############################################################################
# Nearly l_inf: a single large weight. The prox subtracts the projection
# onto an l1 ball, which clips the largest entries to a common level and
# leaves small ones alone.

w_inf = np.array([2.0, 0, 0, 0, 0])
print("l_inf weights   ", w_inf, "->", prox_owl(v, w_inf))

###############################################################################
# Norm and dual norm obey Hoelder's inequality for any pair of vectors.

rng = np.random.default_rng(0)
a, b = rng.standard_normal(5), rng.standard_normal(5)
print(f"|<a,b>| = {abs(a @ b):.3f} <= {owl_norm(a, w_ramp) * owl_dual_norm(b, w_ramp):.3f}")
