"""Pose arithmetic for 6-DoF LiDAR localization.

Poses are ``(x, y, z, roll, pitch, yaw)`` with the ZYX Euler convention,
i.e. ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.  Addition and subtraction are
component-wise on the 6-vector (angles wrapped), which is what the filters
use for prediction and averaging.  Group composition is provided separately
for transforming points and for inverting poses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi
ANGLES = slice(3, 6)


def normalize_angle(theta):
    """Wrap angle(s) into (-pi, pi]. Works on scalars and arrays."""
    theta = np.asarray(theta, dtype=float)
    wrapped = np.pi - np.mod(np.pi - theta, TWO_PI)
    # mod can round up to exactly 2*pi
    wrapped = np.where(wrapped <= -np.pi, np.pi, wrapped)
    # in-range angles pass through bit-exact
    wrapped = np.where((theta > -np.pi) & (theta <= np.pi), theta, wrapped)
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class Pose6D:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("roll", "pitch", "yaw"):
            object.__setattr__(self, name, normalize_angle(getattr(self, name)))

    @classmethod
    def from_array(cls, v) -> "Pose6D":
        v = np.asarray(v, dtype=float).reshape(6)
        return cls(*(float(c) for c in v))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.roll, self.pitch, self.yaw])

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.roll, self.pitch, self.yaw)


@dataclass(frozen=True)
class ScanFrame:
    """One LiDAR sweep in the sensor frame.

    ``points`` is ``(K, 3)``; ``ranges`` is ``(K,)`` with the point norms.
    """

    points: np.ndarray
    ranges: np.ndarray

    @classmethod
    def from_points(cls, points) -> "ScanFrame":
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return cls(pts, np.linalg.norm(pts, axis=1))

    def __len__(self) -> int:
        return len(self.points)

    def validate(self, tol: float = 1e-6) -> None:
        if self.points.shape != (len(self.ranges), 3):
            raise ValueError("points and ranges have different lengths")
        if np.any(self.ranges < 0):
            raise ValueError("negative range")
        if not np.allclose(np.linalg.norm(self.points, axis=1), self.ranges, atol=tol, rtol=0):
            raise ValueError("ranges inconsistent with point norms")


def as_vec(pose) -> np.ndarray:
    if isinstance(pose, Pose6D):
        return pose.as_array()
    return np.asarray(pose, dtype=float)


def rotation_matrix(roll, pitch, yaw) -> np.ndarray:
    """ZYX rotation matrix. Broadcasts over array inputs, returning ``(..., 3, 3)``."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    R = np.empty(np.shape(cr) + (3, 3))
    R[..., 0, 0] = cy * cp
    R[..., 0, 1] = cy * sp * sr - sy * cr
    R[..., 0, 2] = cy * sp * cr + sy * sr
    R[..., 1, 0] = sy * cp
    R[..., 1, 1] = sy * sp * sr + cy * cr
    R[..., 1, 2] = sy * sp * cr - cy * sr
    R[..., 2, 0] = -sp
    R[..., 2, 1] = cp * sr
    R[..., 2, 2] = cp * cr
    return R


def matrix_to_euler(R: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rotation_matrix` -> ``(roll, pitch, yaw)``; no gimbal-lock handling."""
    pitch = np.arctan2(-R[..., 2, 0], np.hypot(R[..., 2, 1], R[..., 2, 2]))
    roll = np.arctan2(R[..., 2, 1], R[..., 2, 2])
    yaw = np.arctan2(R[..., 1, 0], R[..., 0, 0])
    return np.stack([roll, pitch, yaw], axis=-1)


def transform_points(pose, points) -> np.ndarray:
    """Map sensor-frame points ``(K, 3)`` into the map frame."""
    v = as_vec(pose)
    R = rotation_matrix(v[3], v[4], v[5])
    return np.asarray(points, dtype=float) @ R.T + v[:3]


def transform_point(pose, p) -> np.ndarray:
    return transform_points(pose, np.asarray(p, dtype=float).reshape(1, 3))[0]


def transform_points_batch(poses: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Transform the same point set by N poses: ``(N, 6), (K, 3) -> (N, K, 3)``."""
    R = rotation_matrix(poses[:, 3], poses[:, 4], poses[:, 5])
    return np.matmul(points, R.transpose(0, 2, 1)) + poses[:, None, :3]


def compose(a, b) -> Pose6D:
    """Group composition ``a * b`` (apply ``b`` then ``a``)."""
    va, vb = as_vec(a), as_vec(b)
    Ra = rotation_matrix(*va[ANGLES])
    Rb = rotation_matrix(*vb[ANGLES])
    t = Ra @ vb[:3] + va[:3]
    return Pose6D.from_array(np.concatenate([t, matrix_to_euler(Ra @ Rb)]))


def inverse(pose) -> Pose6D:
    v = as_vec(pose)
    R = rotation_matrix(*v[ANGLES])
    return Pose6D.from_array(np.concatenate([-R.T @ v[:3], matrix_to_euler(R.T)]))


def pose_delta(a, b):
    """Component-wise ``a - b`` with wrapped angles. Accepts Pose6D or ``(..., 6)`` arrays."""
    d = as_vec(a) - as_vec(b)
    d[..., ANGLES] = normalize_angle(d[..., ANGLES])
    return Pose6D.from_array(d) if isinstance(a, Pose6D) else d


def pose_add(a, d):
    """Component-wise ``a + d`` with wrapped angles. Accepts Pose6D or ``(..., 6)`` arrays."""
    s = as_vec(a) + as_vec(d)
    s[..., ANGLES] = normalize_angle(s[..., ANGLES])
    return Pose6D.from_array(s) if isinstance(a, Pose6D) else s


def wrap_pose_array(v: np.ndarray) -> np.ndarray:
    v = np.array(v, dtype=float)
    v[..., ANGLES] = normalize_angle(v[..., ANGLES])
    return v
