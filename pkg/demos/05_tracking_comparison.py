"""Track a short corridor run with every estimator and compare errors.

PFF fuses the particle filter with scan matching; MMO is scan matching
alone (class-conditional or likelihood-field model); EKF fuses the same
optimizer output with a Kalman filter; SPF is a plain particle filter,
with and without odometry.
"""

import numpy as np

from pffloc import FilterParams, ModelParams, OptimizerParams, ScanSimParams, build_field, run_localization
from pffloc.filters import Settings
from pffloc.simulator import simulate_run

steps = 60
sim = simulate_run(1, "corridor", steps, ScanSimParams(1000, 0.02, 0.2, 30.0), density=50.0,
                   odom_cov=np.diag([0.05**2] * 3 + [0.01**2] * 3))
field = build_field(sim.world.map_points, 0.2, margin=1.0)
opt = OptimizerParams(delta_conv=1e-4)
base = Settings(optimizer=opt, filter=FilterParams(sigma_o_sq=100.0))
lfm = Settings(model=ModelParams(z_max=120.0), optimizer=opt, filter=base.filter)

print(f"corridor, {steps} steps, 20% of each scan hits unmapped clutter\n")
print(f"{'method':<10}{'pos [cm]':>10}{'ang [deg]':>11}{'ms/step':>9}")
for method in ("pff", "mmo", "mmolfm", "ekf", "spf_odom", "spf"):
    r = run_localization(sim.scans, sim.ground_truth[0], field, lfm if method == "mmolfm" else base, method,
                         seed=1, odometry=sim.odometry, ground_truth=sim.ground_truth)
    rep = r.report
    flag = "  (lost)" if rep.tracking_failed else ""
    print(f"{method:<10}{100 * rep.pos_mean:>10.1f}{rep.ang_mean:>11.2f}{np.mean(r.times_ms[1:]):>9.1f}{flag}")
