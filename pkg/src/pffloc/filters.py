"""Pose trackers: the particle/scan-matching fusion filter and its baselines.

``step_pff`` runs one cycle of the fusion filter: predict the particles by
linear interpolation of the last two estimates, optimize the scan against
the map, approximate the measurement model by a Gaussian around the
optimum, draw extra particles from it, and weight the two populations
against each other (predictive particles by the Gaussian, measurement
particles by a kernel mixture over the predictive particles).

The baselines share the state type: ``step_mmo`` (optimizer only),
``step_spf`` (bootstrap particle filter), ``step_ekf`` (Kalman fusion of
interpolation and optimizer).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .distance_field import VoxelDistanceField
from .geometry import ScanFrame, normalize_angle, pose_add, pose_delta, wrap_pose_array
from .measurement import Model, ModelParams, batch_log_likelihood
from .optimizer import (DegenerateScanError, OptimizationError, OptimizationResult, OptimizerParams,
                        approximate_covariance, gauss_newton, voxel_grid_filter)
from .particles import (Origin, ParticleSet, effective_sample_size, estimate_pose, make_particles,
                        normalize_log_weights, resample, sample_gaussian_poses,
                        sample_measurement_particles, weight_measurement_log, weight_predictive_log)

log = logging.getLogger(__name__)


def table1_motion_cov(diag=0.5, off=0.01) -> np.ndarray:
    return np.full((6, 6), off) + np.eye(6) * (diag - off)


@dataclass
class FilterParams:
    m_particles: int = 1000
    l_particles: int = 1000
    motion_cov: np.ndarray = dc_field(default_factory=table1_motion_cov)
    proposal_cov: np.ndarray = dc_field(default_factory=lambda: np.diag([0.3, 0.3, 0.3, 0.1, 0.1, 0.1]))
    sigma_o_sq: float = 1.0
    init_spread: np.ndarray = dc_field(default_factory=lambda: np.array([0.1, 0.1, 0.05, 0.01, 0.01, 0.02]))
    resample_threshold_fraction: float = 0.5
    # prediction noise for odometry-driven prediction (SPF with odometry)
    odom_cov: np.ndarray = dc_field(default_factory=lambda: np.diag([0.05**2] * 3 + [0.01**2] * 3))

    def __post_init__(self):
        self.motion_cov = np.asarray(self.motion_cov, dtype=float)
        self.proposal_cov = np.asarray(self.proposal_cov, dtype=float)
        self.init_spread = np.asarray(self.init_spread, dtype=float)
        self.odom_cov = np.asarray(self.odom_cov, dtype=float)
        if self.m_particles < 1 or self.l_particles < 0:
            raise ValueError("need M >= 1 and L >= 0")
        if np.any(self.motion_cov <= 0):
            raise ValueError("every motion covariance entry must be positive")
        if np.any(np.diag(self.proposal_cov) <= 0):
            raise ValueError("proposal covariance diagonal must be positive")


@dataclass
class Settings:
    """Everything a step needs besides state and scan."""

    model: ModelParams = dc_field(default_factory=ModelParams)
    optimizer: OptimizerParams = dc_field(default_factory=OptimizerParams)
    filter: FilterParams = dc_field(default_factory=FilterParams)
    measurement_model: Model = Model.CLASS_CONDITIONAL


@dataclass
class FilterState:
    particles: ParticleSet
    x_prev: np.ndarray
    x_prev2: np.ndarray
    estimate: np.ndarray
    rng: np.random.Generator
    rng_seed: int
    last_opt: OptimizationResult | None = None
    cov: np.ndarray | None = None  # EKF only
    ess: float = float("nan")
    resampled: bool = False
    degenerate: bool = False
    optimizer_failed: bool = False
    step: int = 0


def initialize(initial, params: FilterParams, seed: int) -> FilterState:
    """Scatter M particles around ``initial`` with uniform weights."""
    rng = np.random.default_rng(seed)
    x0 = wrap_pose_array(getattr(initial, "as_array", lambda: initial)())
    m = params.m_particles
    poses = wrap_pose_array(x0 + rng.standard_normal((m, 6)) * params.init_spread)
    return FilterState(make_particles(poses), x0.copy(), x0.copy(), x0.copy(), rng, seed,
                       cov=np.diag(np.maximum(params.init_spread, 1e-6) ** 2))


def linear_prediction(state: FilterState) -> np.ndarray:
    """Next pose by extrapolating the last two estimates."""
    return pose_add(state.x_prev, pose_delta(state.x_prev, state.x_prev2))


def predict_linear(poses, state: FilterState, params: FilterParams, rng) -> np.ndarray:
    """Move each pose by ``N(x_prev - x_prev2, motion_cov)``."""
    mean = pose_delta(state.x_prev, state.x_prev2)
    return predict_with_delta(poses, mean, params.motion_cov, rng)


def predict_with_delta(poses, mean_delta, cov, rng) -> np.ndarray:
    poses = np.atleast_2d(poses)
    deltas = rng.multivariate_normal(np.asarray(mean_delta, float), cov, size=len(poses), method="cholesky")
    return pose_add(poses, deltas)


def _predictive_population(state: FilterState):
    """Poses and prior weights of the particles to propagate.

    Without a resample the set still holds last step's measurement samples;
    they are dropped and the predictive particles keep their weights.
    """
    ps = state.particles.of(Origin.PREDICTIVE)
    w = ps.weights
    total = w.sum()
    if not np.isfinite(total) or total <= 0:
        w = np.full(len(ps), 1.0 / len(ps))
    else:
        w = w / total
    return ps.poses, w


def _optimize(init, scan, field, settings: Settings, model):
    filtered = voxel_grid_filter(scan, settings.optimizer.voxel_filter_res)
    try:
        return gauss_newton(init, filtered, field, settings.model, settings.optimizer, model,
                            sigma_o_sq=settings.filter.sigma_o_sq)
    except (DegenerateScanError, OptimizationError, ValueError) as exc:
        log.warning("scan optimization failed: %s", exc)
        return None


def _disturbed(opt: OptimizationResult, disturbance):
    if disturbance is None:
        return opt
    pose = pose_add(opt.pose_opt.as_array(), np.asarray(disturbance, float))
    return replace(opt, pose_opt=type(opt.pose_opt).from_array(pose))


def _finish(state: FilterState, particles: ParticleSet, estimate, threshold_n, m, **flags) -> FilterState:
    ess = effective_sample_size(particles.weights)
    resampled = ess < threshold_n
    if resampled:
        particles = resample(particles, m, state.rng)
    return replace(state, particles=particles, x_prev2=state.x_prev, x_prev=estimate,
                   estimate=estimate, ess=ess, resampled=resampled, step=state.step + 1, **flags)


def step_pff(state: FilterState, scan: ScanFrame, field: VoxelDistanceField, settings: Settings,
             disturbance=None, odometry=None) -> FilterState:
    """One cycle of the fusion filter.

    ``disturbance`` (a 6-vector) is added to the optimized pose before it is
    used, to probe robustness against bad scan matches.  ``odometry``, if
    given, replaces linear interpolation in the particle prediction exactly
    as in :func:`step_spf`; the optimizer is still seeded by interpolation.
    """
    fp = settings.filter
    rng = state.rng
    prev, prior = _predictive_population(state)
    if odometry is not None:
        pred = predict_with_delta(prev, odometry, fp.odom_cov, rng)
    else:
        pred = predict_linear(prev, state, fp, rng)
    m = len(pred)

    opt = _optimize(linear_prediction(state), scan, field, settings, settings.measurement_model)
    if opt is None:
        particles = make_particles(pred)
        est = estimate_pose(particles.poses, particles.weights)
        return _finish(state, particles, est, fp.resample_threshold_fraction * m, fp.m_particles,
                       last_opt=None, optimizer_failed=True, degenerate=True)

    opt = _disturbed(opt, disturbance)
    x_opt = opt.pose_opt.as_array()
    cov = approximate_covariance(opt.hessian, fp.sigma_o_sq)
    meas = sample_measurement_particles(x_opt, cov, fp.l_particles, rng)

    # prior weights are uniform after a resample, which gives the plain
    # 1/M mixture and unweighted predictive densities
    # a prior weight that underflowed to zero just drops out of both terms
    with np.errstate(divide="ignore"):
        log_w = np.concatenate([
            np.log(prior * m) + weight_predictive_log(pred, x_opt, cov),
            weight_measurement_log(meas.poses, pred, fp.proposal_cov, prior) if len(meas) else np.empty(0),
        ])
    weights, degenerate = normalize_log_weights(log_w)
    particles = ParticleSet.concat(make_particles(pred), meas)
    particles.weights = weights
    est = estimate_pose(particles.poses, weights)
    n_total = m + len(meas)
    return _finish(state, particles, est, fp.resample_threshold_fraction * n_total, fp.m_particles,
                   last_opt=opt, optimizer_failed=False, degenerate=degenerate)


def step_mmo(state: FilterState, scan: ScanFrame, field: VoxelDistanceField, settings: Settings,
             model=None, disturbance=None) -> FilterState:
    """Scan optimization seeded by linear interpolation; the optimum is the estimate."""
    model = settings.measurement_model if model is None else Model(model)
    opt = _optimize(linear_prediction(state), scan, field, settings, model)
    if opt is None:
        est = state.estimate.copy()
        return replace(state, x_prev2=state.x_prev, x_prev=est, estimate=est, last_opt=None,
                       optimizer_failed=True, step=state.step + 1)
    opt = _disturbed(opt, disturbance)
    est = opt.pose_opt.as_array()
    return replace(state, x_prev2=state.x_prev, x_prev=est, estimate=est, last_opt=opt,
                   optimizer_failed=False, step=state.step + 1)


def step_spf(state: FilterState, scan: ScanFrame, field: VoxelDistanceField, settings: Settings,
             odometry=None) -> FilterState:
    """Bootstrap particle filter with the class-conditional scan likelihood.

    With ``odometry`` (a per-step pose delta) particles move by it plus
    ``odom_cov`` noise; without it they follow the linear interpolation
    with ``motion_cov`` noise.
    """
    fp = settings.filter
    rng = state.rng
    ps = state.particles
    if odometry is not None:
        poses = predict_with_delta(ps.poses, odometry, fp.odom_cov, rng)
    else:
        poses = predict_linear(ps.poses, state, fp, rng)
    filtered = voxel_grid_filter(scan, settings.optimizer.voxel_filter_res)
    log_l = batch_log_likelihood(poses, filtered, field, settings.model, settings.measurement_model)
    # shift by the max before exponentiating; prior weights carry over
    log_w = np.log(np.maximum(ps.weights, 1e-300)) + log_l - np.max(log_l)
    weights, degenerate = normalize_log_weights(log_w)
    particles = make_particles(poses, weights)
    est = estimate_pose(poses, weights)
    return _finish(state, particles, est, fp.resample_threshold_fraction * len(particles),
                   fp.m_particles, degenerate=degenerate)


def step_ekf(state: FilterState, scan: ScanFrame, field: VoxelDistanceField, settings: Settings,
             disturbance=None) -> FilterState:
    """Kalman fusion of the interpolated prediction and the optimized pose.

    The measurement is the optimized pose itself (identity model) with the
    approximated measurement-model covariance as its noise.
    """
    fp = settings.filter
    mean = linear_prediction(state)
    P = state.cov + fp.motion_cov
    opt = _optimize(mean, scan, field, settings, settings.measurement_model)
    if opt is None:
        return replace(state, x_prev2=state.x_prev, x_prev=mean, estimate=mean, cov=P,
                       last_opt=None, optimizer_failed=True, step=state.step + 1)
    opt = _disturbed(opt, disturbance)
    R = approximate_covariance(opt.hessian, fp.sigma_o_sq)
    est, P = kalman_update(mean, P, opt.pose_opt.as_array(), R)
    return replace(state, x_prev2=state.x_prev, x_prev=est, estimate=est, cov=P,
                   last_opt=opt, optimizer_failed=False, step=state.step + 1)


def kalman_update(mean, P, z, R):
    """Identity-measurement Kalman update with wrapped angle innovation."""
    innov = pose_delta(np.asarray(z, float), np.asarray(mean, float))
    S = P + R
    K = np.linalg.solve(S.T, P.T).T
    est = pose_add(np.asarray(mean, float), K @ innov)
    I_K = np.eye(len(P)) - K
    P_new = I_K @ P @ I_K.T + K @ R @ K.T
    return est, 0.5 * (P_new + P_new.T)
