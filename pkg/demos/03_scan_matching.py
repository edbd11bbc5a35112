"""Recover a pose from a perturbed guess by scan matching, and read off its uncertainty.

The optimizer runs damped Gauss-Newton on the residuals 1 - p with a
forward-difference Jacobian.  J^T J at the optimum, scaled by 1/sigma_O^2,
gives the Gaussian that the particle filter uses as its approximated
measurement model.
"""

import numpy as np

from pffloc import ModelParams, OptimizerParams, ScanSimParams, build_field, gauss_newton, generate_world
from pffloc.simulator import simulate_scan

world = generate_world(seed=2, preset="room", density=100.0)
field = build_field(world.map_points, 0.05, margin=1.0)
rng = np.random.default_rng(7)
truth = np.array([4.0, 6.0, 1.2, 0.0, 0.0, 0.8])
scan = simulate_scan(truth, world, ScanSimParams(500, 0.0, 0.0, 30.0), rng)

start = truth + np.array([0.25, -0.2, 0.1, np.radians(2), np.radians(-2), np.radians(5)])
for delta in (0.02, 1e-4):
    res = gauss_newton(start, scan, field, ModelParams(), OptimizerParams(delta_conv=delta), sigma_o_sq=100.0)
    err = res.pose_opt.as_array() - truth
    print(f"delta_conv {delta:g}: {res.iterations} iterations, position error {100 * np.linalg.norm(err[:3]):.1f} cm, "
          f"largest angle error {np.degrees(np.abs(err[3:])).max():.2f} deg")

std = np.sqrt(np.diag(res.covariance))
print("approximated measurement-model std (sigma_O^2 = 100):")
print("  x y z [cm]      ", np.round(100 * std[:3], 2))
print("  roll pitch yaw [deg]", np.round(np.degrees(std[3:]), 3))
