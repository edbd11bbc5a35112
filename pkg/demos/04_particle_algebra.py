"""The particle bookkeeping behind one fusion step, on toy numbers.

Predictive particles are weighted by the optimizer's Gaussian; particles
drawn from that Gaussian are weighted by a kernel mixture placed on the
predictive particles.  Both sets are normalized together, averaged, and
resampled when the effective sample size drops below half.
"""

import numpy as np

from pffloc.particles import (effective_sample_size, estimate_pose, normalize_log_weights,
                              sample_measurement_particles, systematic_indices, weight_measurement_log,
                              weight_predictive_log)

rng = np.random.default_rng(0)
prior_mean = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.1])
prior_std = np.array([0.3, 0.3, 0.05, 0.02, 0.02, 0.05])
pred = prior_mean + rng.normal(scale=prior_std, size=(500, 6))

x_opt = np.array([1.2, 0.05, 0.0, 0.0, 0.0, 0.12])
cov = np.diag([0.1, 0.1, 0.05, 0.02, 0.02, 0.03]) ** 2
meas = sample_measurement_particles(x_opt, cov, 500, rng).poses
poses = np.vstack([pred, meas])

# The mixture weight is the prior smoothed by the kernel.  A kernel much wider
# than the prior spread flattens it and starves the measurement particles.
kernels = {"wide kernel (0.3 m, 0.3 rad)": np.diag([0.3, 0.3, 0.3, 0.1, 0.1, 0.1]) ** 2,
           "kernel at half the prior spread": np.diag(prior_std / 2) ** 2}
for name, kernel in kernels.items():
    log_w = np.concatenate([weight_predictive_log(pred, x_opt, cov), weight_measurement_log(meas, pred, kernel)])
    w, _ = normalize_log_weights(log_w)
    ess = effective_sample_size(w)
    print(f"{name}:")
    print(f"  weight on predictive {w[:500].sum():.3f}, on measurement {w[500:].sum():.3f}")
    print("  fused estimate x, y, yaw:", np.round(estimate_pose(poses, w)[[0, 1, 5]], 3))
    print(f"  ESS {ess:.1f} of {len(w)} -> resample: {ess < 0.5 * len(w)}")

idx = systematic_indices(w, 500, rng.uniform())
print(f"systematic resampling kept {len(np.unique(idx))} distinct particles")

# the wrap-around case the circular mean exists for
pair = np.zeros((2, 6))
pair[:, 5] = [3.1, -3.1]
print("mean of yaw 3.1 and -3.1:", round(float(estimate_pose(pair, [0.5, 0.5])[5]), 4))
