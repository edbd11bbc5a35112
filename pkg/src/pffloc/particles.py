"""Particle-set algebra: sampling, Gaussian weights, normalization, ESS, resampling.

Poses are rows of ``(N, 6)`` arrays.  All Gaussian evaluations wrap angle
residuals into (-pi, pi] before the quadratic form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.special import logsumexp

from .geometry import ANGLES, normalize_angle, wrap_pose_array

log = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


class Origin(IntEnum):
    PREDICTIVE = 0
    MEASUREMENT = 1


@dataclass
class ParticleSet:
    poses: np.ndarray    # (N, 6)
    weights: np.ndarray  # (N,)
    origin: np.ndarray   # (N,) int8 of Origin

    def __len__(self) -> int:
        return len(self.weights)

    @classmethod
    def concat(cls, a: "ParticleSet", b: "ParticleSet") -> "ParticleSet":
        return cls(np.concatenate([a.poses, b.poses]), np.concatenate([a.weights, b.weights]),
                   np.concatenate([a.origin, b.origin]))

    def subset(self, mask) -> "ParticleSet":
        return ParticleSet(self.poses[mask], self.weights[mask], self.origin[mask])

    def of(self, origin: Origin) -> "ParticleSet":
        return self.subset(self.origin == origin)


def make_particles(poses, weights=None, origin=Origin.PREDICTIVE) -> ParticleSet:
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    n = len(poses)
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    return ParticleSet(poses, w, np.full(n, int(origin), dtype=np.int8))


# -- Gaussian densities -------------------------------------------------------

def pose_residuals(poses, mean) -> np.ndarray:
    r = np.atleast_2d(poses) - np.asarray(mean, dtype=float)
    r[:, ANGLES] = normalize_angle(r[:, ANGLES])
    return r


def gaussian_log_density(poses, mean, cov) -> np.ndarray:
    """Log of the 6-D normal density with angle-wrapped residuals."""
    L = np.linalg.cholesky(cov)
    z = np.linalg.solve(L, pose_residuals(poses, mean).T)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * np.sum(z * z, axis=0) - 0.5 * (len(cov) * LOG_2PI + logdet)


def gaussian_density(poses, mean, cov) -> np.ndarray:
    return np.exp(gaussian_log_density(poses, mean, cov))


def weight_predictive_log(poses, opt_pose, covariance) -> np.ndarray:
    """Log-weights of predictive particles under the approximated measurement model."""
    return gaussian_log_density(poses, opt_pose, covariance)


def weight_predictive(poses, opt_pose, covariance) -> np.ndarray:
    return np.exp(weight_predictive_log(poses, opt_pose, covariance))


def _circular_reference(poses) -> np.ndarray:
    ang = poses[:, ANGLES]
    return np.concatenate([np.zeros(3), np.arctan2(np.sin(ang).mean(0), np.cos(ang).mean(0))])


def _recentered(poses, ref):
    r = np.atleast_2d(poses) - ref
    r[:, ANGLES] = normalize_angle(r[:, ANGLES])
    return r


def weight_measurement_log(meas_poses, pred_poses, proposal_cov, pred_weights=None) -> np.ndarray:
    """Log-density of each measurement particle under the predictive mixture.

    The mixture puts one Gaussian with covariance ``proposal_cov`` on every
    predictive particle, with equal weights unless ``pred_weights`` is given.
    """
    meas = np.atleast_2d(meas_poses)
    pred = np.atleast_2d(pred_poses)
    n_pred = len(pred)
    if pred_weights is None:
        log_mix = np.full(n_pred, -np.log(n_pred))
    else:
        log_mix = np.log(np.asarray(pred_weights, float) / np.sum(pred_weights))
    L = np.linalg.cholesky(proposal_cov)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    const = -0.5 * (len(proposal_cov) * LOG_2PI + logdet)

    ref = _circular_reference(pred)
    a = _recentered(meas, ref)
    b = _recentered(pred, ref)
    Linv = np.linalg.inv(L)
    wa = a @ Linv.T
    wb = b @ Linv.T
    d2 = (np.sum(wa * wa, axis=1)[:, None] + np.sum(wb * wb, axis=1)[None, :]
          - 2.0 * wa @ wb.T)
    # the Gram form skips angle wrapping; that is exact unless one side of a
    # pair has a recentred angle beyond a quarter turn, so redo those exactly
    half = np.pi / 2
    ext_a = np.any(np.abs(a[:, ANGLES]) > half, axis=1)
    ext_b = np.any(np.abs(b[:, ANGLES]) > half, axis=1)
    if ext_b.any():
        d2[:, ext_b] = _wrapped_sq_dist(meas, pred[ext_b], Linv)
    if ext_a.any():
        d2[ext_a, :] = _wrapped_sq_dist(meas[ext_a], pred, Linv)
    d2 = np.maximum(d2, 0.0)
    return logsumexp(-0.5 * d2 + log_mix[None, :], axis=1) + const


def _wrapped_sq_dist(a, b, Linv, chunk: int = 64) -> np.ndarray:
    out = np.empty((len(a), len(b)))
    for s in range(0, len(a), chunk):
        diff = a[s:s + chunk, None, :] - b[None, :, :]
        diff[..., ANGLES] = normalize_angle(diff[..., ANGLES])
        w = diff @ Linv.T
        out[s:s + chunk] = np.sum(w * w, axis=2)
    return out


def weight_measurement_samples(meas_poses, pred_poses, proposal_cov, pred_weights=None) -> np.ndarray:
    return np.exp(weight_measurement_log(meas_poses, pred_poses, proposal_cov, pred_weights))


# -- sampling -----------------------------------------------------------------

def sample_gaussian_poses(mean, cov, count: int, rng) -> np.ndarray:
    """``mean + P t`` with ``P`` the lower Cholesky factor of ``cov`` and ``t ~ N(0, I)``."""
    P = np.linalg.cholesky(cov)
    t = rng.standard_normal((count, 6))
    return wrap_pose_array(np.asarray(mean, dtype=float) + t @ P.T)


def sample_measurement_particles(opt_pose, covariance, count: int, rng) -> ParticleSet:
    poses = sample_gaussian_poses(opt_pose, covariance, count, rng)
    return make_particles(poses, np.full(count, 1.0 / max(count, 1)), Origin.MEASUREMENT)


# -- normalization and estimation ---------------------------------------------

def normalize_weights(weights):
    """Divide by the total. Returns ``(weights, degenerate)``.

    A zero or non-finite total resets to uniform and logs a warning.
    """
    w = np.asarray(weights, dtype=float)
    total = np.sum(w)
    if not np.isfinite(total) or total <= 0 or not np.all(np.isfinite(w)):
        log.warning("degenerate particle weights (sum=%r); resetting to uniform", total)
        return np.full(len(w), 1.0 / len(w)), True
    return w / total, False


def normalize_log_weights(log_w):
    """Normalize log-weights jointly; same contract as :func:`normalize_weights`."""
    log_w = np.asarray(log_w, dtype=float)
    if not np.any(np.isfinite(log_w)) or np.any(np.isnan(log_w)):
        log.warning("degenerate particle log-weights; resetting to uniform")
        return np.full(len(log_w), 1.0 / len(log_w)), True
    w = np.exp(log_w - logsumexp(log_w))
    return w / w.sum(), False


def estimate_pose(poses, weights) -> np.ndarray:
    """Weighted mean; angles use the circular mean so +-pi wrap is handled."""
    poses = np.atleast_2d(poses)
    w = np.asarray(weights, dtype=float)
    out = np.empty(6)
    out[:3] = w @ poses[:, :3]
    ang = poses[:, ANGLES]
    out[3:] = np.arctan2(w @ np.sin(ang), w @ np.cos(ang))
    return wrap_pose_array(out)


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def systematic_indices(weights, count: int, offset: float) -> np.ndarray:
    """Low-variance resampling indices for a start ``offset`` in [0, 1)."""
    w = np.asarray(weights, dtype=float)
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    positions = (offset + np.arange(count)) / count
    return np.minimum(np.searchsorted(cdf, positions, side="right"), len(w) - 1)


def resample(particles: ParticleSet, count: int, rng) -> ParticleSet:
    """Systematic resampling of the whole set to ``count`` predictive particles."""
    idx = systematic_indices(particles.weights, count, rng.uniform())
    return make_particles(particles.poses[idx].copy(), np.full(count, 1.0 / count), Origin.PREDICTIVE)
