"""Per-point LiDAR likelihoods over a distance field.

Every density is divided by its peak so per-point likelihoods live in
[0, 1] and ``1 - p`` is a valid residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .distance_field import VoxelDistanceField
from .geometry import ScanFrame, transform_points, transform_points_batch

LOG_FLOOR = 1e-12


class Model(str, Enum):
    CLASS_CONDITIONAL = "class_conditional"
    LFM = "lfm"


@dataclass(frozen=True)
class ModelParams:
    sigma_sq: float = 0.4
    lam: float = 0.001
    r_max: float = 120.0
    z_hit: float = 0.9
    z_rand: float = 0.05
    z_max: float = 0.05
    prior_known: float = 0.5
    epsilon: float = 0.5

    def __post_init__(self):
        if self.sigma_sq <= 0 or self.lam <= 0 or self.r_max <= 0:
            raise ValueError("sigma_sq, lam and r_max must be positive")
        if min(self.z_hit, self.z_rand, self.z_max) < 0 or self.z_hit + self.z_rand > 1:
            raise ValueError("invalid likelihood-field mixture weights")
        if not 0 <= self.prior_known <= 1:
            raise ValueError("prior_known must lie in [0, 1]")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")


def likelihood_known(d, params: ModelParams):
    """Peak-normalized Gaussian over the distance to the nearest map point."""
    d = np.asarray(d, dtype=float)
    return np.exp(-(d * d) / (2.0 * params.sigma_sq))


def likelihood_unknown(r, params: ModelParams):
    """Peak-normalized truncated exponential over the measured range.

    The truncation constant ``1 - exp(-lam * r_max)`` and the rate factor
    cancel under peak normalization, leaving ``exp(-lam * r)``.  Ranges
    beyond ``r_max`` are clamped.
    """
    r = np.minimum(np.asarray(r, dtype=float), params.r_max)
    return np.exp(-params.lam * r)


def class_conditional_likelihood(d, r, params: ModelParams):
    pk = params.prior_known
    return pk * likelihood_known(d, params) + (1.0 - pk) * likelihood_unknown(r, params)


def lfm_likelihood(d, params: ModelParams):
    """Likelihood-field mixture ``z_hit * N + z_rand / z_max``, capped at 1.

    With ``z_rand == z_max`` the floor alone is 1 and the model is flat.
    """
    floor = params.z_rand / params.z_max if params.z_max > 0 else 0.0
    return np.minimum(params.z_hit * likelihood_known(d, params) + floor, 1.0)


def point_likelihoods(d, r, params: ModelParams, model=Model.CLASS_CONDITIONAL):
    if Model(model) is Model.LFM:
        return lfm_likelihood(d, params)
    return class_conditional_likelihood(d, r, params)


def residual(p_z):
    return 1.0 - np.asarray(p_z, dtype=float)


def scan_point_likelihoods(pose, scan: ScanFrame, field: VoxelDistanceField, params: ModelParams,
                           model=Model.CLASS_CONDITIONAL) -> np.ndarray:
    d = field.query(transform_points(pose, scan.points))
    return point_likelihoods(d, scan.ranges, params, model)


def scan_log_likelihood(pose, scan: ScanFrame, field: VoxelDistanceField, params: ModelParams,
                        model=Model.CLASS_CONDITIONAL) -> float:
    if len(scan) == 0:
        raise ValueError("empty scan")
    p = scan_point_likelihoods(pose, scan, field, params, model)
    return float(np.sum(np.log(np.maximum(p, LOG_FLOOR))))


def batch_log_likelihood(poses: np.ndarray, scan: ScanFrame, field: VoxelDistanceField,
                         params: ModelParams, model=Model.CLASS_CONDITIONAL) -> np.ndarray:
    """Scan log-likelihood for each of ``(N, 6)`` poses."""
    out = np.empty(len(poses))
    step = max(1, 200_000 // max(len(scan), 1))
    for s in range(0, len(poses), step):
        world = transform_points_batch(poses[s:s + step], scan.points)
        n, k, _ = world.shape
        d = field.query(world.reshape(-1, 3)).reshape(n, k)
        p = point_likelihoods(d, scan.ranges[None, :], params, model)
        out[s:s + step] = np.log(np.maximum(p, LOG_FLOOR)).sum(axis=1)
    return out
