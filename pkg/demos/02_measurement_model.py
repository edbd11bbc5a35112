"""How the class-conditional model treats points that the map does not explain.

Each point's likelihood mixes a Gaussian over its distance to the map (the
point is part of the map) with an exponential over its range (the point hit
something unknown).  The residual 1 - p is what the scan matcher minimizes,
and points whose residual exceeds epsilon are dropped.
"""

import numpy as np

from pffloc import ModelParams
from pffloc.measurement import class_conditional_likelihood, lfm_likelihood, likelihood_known, likelihood_unknown

p = ModelParams()
lfm = ModelParams(z_max=120.0)
print(f"sigma^2 = {p.sigma_sq}, lambda = {p.lam}, r_max = {p.r_max}, epsilon = {p.epsilon}\n")
print(f"{'d [m]':>6} {'known':>8} {'class-cond (r=10)':>18} {'residual':>9} {'LFM':>8}")
for d in (0.0, 0.1, 0.3, 0.5, 1.0, 2.0, 5.0):
    cc = class_conditional_likelihood(d, 10.0, p)
    print(f"{d:6.1f} {likelihood_known(d, p):8.4f} {cc:18.4f} {1 - cc:9.4f} {lfm_likelihood(d, lfm):8.4f}")

print("\nthe unknown branch only depends on range:")
for r in (0.0, 10.0, 60.0, 120.0, 200.0):
    print(f"  r = {r:5.0f} m -> {likelihood_unknown(r, p):.4f}")

# a point far from the map keeps half of the unknown likelihood, so its
# residual stays below 0.5 only at short range
far = np.array([10.0, 10.0])
print("\nresidual of a point 10 m off the map at ranges 5 m and 110 m:",
      np.round(1 - class_conditional_likelihood(far, np.array([5.0, 110.0]), p), 4))
