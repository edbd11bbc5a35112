"""Scan-to-map pose optimization by Gauss-Newton on measurement residuals.

The cost is ``0.5 * sum(e_k^2)`` with ``e_k = 1 - p(z_k | x, m)``.  The
Jacobian is taken by forward differences because the distance field is only
piecewise smooth.  A small Levenberg term keeps ``J^T J`` invertible in flat
regions; steps that raise the cost are rejected and the damping escalated.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .distance_field import VoxelDistanceField
from .geometry import (Pose6D, ScanFrame, as_vec, pose_add, transform_points,
                       transform_points_batch, wrap_pose_array)
from .measurement import Model, ModelParams, point_likelihoods

EIGEN_FLOOR = 1e-9
MAX_DAMPING_RETRIES = 5
MAX_DAMPING = 1e8


class DegenerateScanError(RuntimeError):
    """Every residual is gated out; nothing to optimize."""


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerParams:
    delta_trans: float = 0.01
    delta_rot: float = 0.005
    delta_conv: float = 0.02
    max_iterations: int = 30
    epsilon: float = 0.5
    damping: float = 1e-6
    voxel_filter_res: float = 1.0

    def __post_init__(self):
        vals = (self.delta_trans, self.delta_rot, self.delta_conv, self.epsilon,
                self.damping, self.voxel_filter_res)
        if min(vals) <= 0 or self.max_iterations < 1:
            raise ValueError("optimizer parameters must be strictly positive")

    @property
    def steps(self) -> np.ndarray:
        return np.array([self.delta_trans] * 3 + [self.delta_rot] * 3)


@dataclass
class OptimizationResult:
    pose_opt: Pose6D
    hessian: np.ndarray
    covariance: np.ndarray
    iterations: int
    converged: bool
    final_cost: float
    active_points: int
    cost_history: list = dc_field(default_factory=list)


def voxel_grid_filter(scan: ScanFrame, res: float) -> ScanFrame:
    """Replace the points of every occupied ``res`` voxel by their centroid."""
    if res <= 0:
        raise ValueError("voxel filter resolution must be positive")
    if len(scan) == 0:
        return scan
    keys = np.floor(scan.points / res).astype(np.int64)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    sums = np.zeros((len(counts), 3))
    np.add.at(sums, inv, scan.points)
    # keep output order deterministic: by first appearance in the scan
    first = np.full(len(counts), len(inv))
    np.minimum.at(first, inv, np.arange(len(inv)))
    centroids = (sums / counts[:, None])[np.argsort(first, kind="stable")]
    return ScanFrame.from_points(centroids)


def _residuals_at(poses: np.ndarray, scan: ScanFrame, field: VoxelDistanceField,
                  mparams: ModelParams, model) -> np.ndarray:
    world = transform_points_batch(np.atleast_2d(poses), scan.points)
    n, k, _ = world.shape
    d = field.query(world.reshape(-1, 3)).reshape(n, k)
    return 1.0 - point_likelihoods(d, scan.ranges[None, :], mparams, model)


def residual_vector(pose, scan: ScanFrame, field: VoxelDistanceField, mparams: ModelParams,
                    model=Model.CLASS_CONDITIONAL, epsilon: float = 0.5):
    """Residuals ``1 - p`` for every point and the mask of points kept by the gate."""
    if len(scan) == 0:
        raise ValueError("empty scan")
    d = field.query(transform_points(pose, scan.points))
    e = 1.0 - point_likelihoods(d, scan.ranges, mparams, model)
    return e, e <= epsilon


def numerical_jacobian(pose, scan: ScanFrame, field: VoxelDistanceField, mparams: ModelParams,
                       oparams: OptimizerParams, model=Model.CLASS_CONDITIONAL,
                       active=None) -> np.ndarray:
    """Forward-difference Jacobian of the active residuals, ``(K_active, 6)``."""
    base = wrap_pose_array(as_vec(pose))
    if active is None:
        _, active = residual_vector(base, scan, field, mparams, model, oparams.epsilon)
    sub = ScanFrame(scan.points[active], scan.ranges[active])
    if len(sub) == 0:
        raise DegenerateScanError("no active residuals")
    steps = oparams.steps
    poses = np.repeat(base[None, :], 7, axis=0)
    poses[1:] += np.diag(steps)
    e = _residuals_at(poses, sub, field, mparams, model)
    return ((e[1:] - e[0]) / steps[:, None]).T


def approximate_covariance(hessian, sigma_o_sq: float = 1.0) -> np.ndarray:
    """``(1 / sigma_o_sq) * H^-1`` after symmetrizing and flooring the eigenvalues of H."""
    H = np.asarray(hessian, dtype=float)
    H = 0.5 * (H + H.T)
    w, V = np.linalg.eigh(H)
    w = np.maximum(w, EIGEN_FLOOR)
    cov = (V / w) @ V.T / sigma_o_sq
    return 0.5 * (cov + cov.T)


def _cost(e, active) -> float:
    return 0.5 * float(np.sum(e[active] ** 2))


def gauss_newton(init, scan: ScanFrame, field: VoxelDistanceField, mparams: ModelParams,
                 oparams: OptimizerParams, model=Model.CLASS_CONDITIONAL,
                 sigma_o_sq: float = 1.0) -> OptimizationResult:
    """Minimize the summed squared residuals starting from ``init``.

    Each iteration solves ``(J^T J + damping I) dx = J^T e`` and steps
    ``x <- x - dx``.  A step that increases the cost is retried with damping
    times 10, at most five times per iteration; the damping carries over to
    the next iteration and is divided by 10 after every accepted step.
    Iteration stops once the mean absolute change of the residuals shared by
    consecutive active sets drops below ``delta_conv``, or when the damping
    exceeds ``MAX_DAMPING`` without finding a descent step.
    """
    if len(scan) == 0:
        raise ValueError("empty scan")
    x = wrap_pose_array(as_vec(init))
    eps = oparams.epsilon
    e, active = residual_vector(x, scan, field, mparams, model, eps)
    if not active.any():
        raise DegenerateScanError("all residuals exceed the gate")
    cost = _cost(e, active)
    history = [cost]
    converged = False
    iterations = 0
    eye = np.eye(6)

    lam = oparams.damping
    for iterations in range(1, oparams.max_iterations + 1):
        J = numerical_jacobian(x, scan, field, mparams, oparams, model, active)
        H = J.T @ J
        g = J.T @ e[active]
        accepted = False
        for _ in range(MAX_DAMPING_RETRIES + 1):
            dx = np.linalg.solve(H + lam * eye, g)
            x_new = pose_add(x, -dx)
            e_new, active_new = residual_vector(x_new, scan, field, mparams, model, eps)
            cost_new = _cost(e_new, active_new)
            if not np.isfinite(cost_new):
                raise OptimizationError(f"non-finite cost at iteration {iterations}: {x_new}")
            if active_new.any() and cost_new <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            if lam > MAX_DAMPING:
                # no descent direction left: the current pose is a local minimum
                converged = True
                break
            continue
        lam = max(lam / 10.0, oparams.damping)
        shared = active & active_new
        change = float(np.mean(np.abs(e_new[shared] - e[shared]))) if shared.any() else np.inf
        x, e, active, cost = x_new, e_new, active_new, cost_new
        history.append(cost)
        if change < oparams.delta_conv:
            converged = True
            break

    J = numerical_jacobian(x, scan, field, mparams, oparams, model, active)
    H = J.T @ J
    H = 0.5 * (H + H.T)
    return OptimizationResult(
        pose_opt=Pose6D.from_array(x),
        hessian=H,
        covariance=approximate_covariance(H, sigma_o_sq),
        iterations=iterations,
        converged=converged,
        final_cost=cost,
        active_points=int(active.sum()),
        cost_history=history,
    )
