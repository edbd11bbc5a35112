"""Tracking error metrics and per-run summaries."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .geometry import as_vec, normalize_angle

FAILURE_THRESHOLD_M = 1.0


def positional_error(est, gt) -> float:
    d = as_vec(est)[..., :3] - as_vec(gt)[..., :3]
    return np.linalg.norm(d, axis=-1)


def angular_error(est, gt):
    """Root-sum-square of the wrapped roll/pitch/yaw differences, in degrees."""
    d = normalize_angle(as_vec(est)[..., 3:] - as_vec(gt)[..., 3:])
    return np.degrees(np.linalg.norm(d, axis=-1))


@dataclass
class RunReport:
    pos_errors: np.ndarray
    ang_errors: np.ndarray
    times_ms: np.ndarray
    pos_mean: float
    pos_std: float
    ang_mean: float
    ang_std: float
    tracking_failed: bool
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "pos_err_m", "ang_err_deg", "time_ms"])
        for i, (p, a, t) in enumerate(zip(self.pos_errors, self.ang_errors, self.times_ms)):
            w.writerow([i, repr(float(p)), repr(float(a)), "" if np.isnan(t) else f"{t:.3f}"])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"positional error [cm]: {100 * self.pos_mean:.2f} / {100 * self.pos_std:.2f}",
            f"angular error [deg]:   {self.ang_mean:.3f} / {self.ang_std:.3f}",
            f"tracking failed:       {self.tracking_failed}",
        ]
        if len(self.times_ms) and not np.isnan(self.times_ms).any():
            lines.append(f"mean step time [ms]:   {np.mean(self.times_ms):.2f}")
        lines += [f"# {k} = {v}" for k, v in self.config.items()]
        return "\n".join(lines)


def aggregate(pos_errors, ang_errors, times_ms=None, config=None) -> RunReport:
    """Mean and population standard deviation; failed iff mean position error > 1 m."""
    pos = np.asarray(pos_errors, dtype=float)
    ang = np.asarray(ang_errors, dtype=float)
    if len(pos) == 0 or len(pos) != len(ang):
        raise ValueError("need equally long, nonempty error lists")
    # NaN marks timings that were never measured (e.g. evaluating files offline)
    times = np.full(len(pos), np.nan) if times_ms is None else np.asarray(times_ms, dtype=float)
    pm = float(np.mean(pos))
    return RunReport(pos, ang, times, pm, float(np.std(pos)), float(np.mean(ang)), float(np.std(ang)),
                     pm > FAILURE_THRESHOLD_M, dict(config or {}))


def evaluate_trajectory(est, gt, times_ms=None, config=None) -> RunReport:
    est, gt = np.asarray(est, float), np.asarray(gt, float)
    if est.shape != gt.shape:
        raise ValueError(f"trajectory length mismatch: {len(est)} estimated vs {len(gt)} ground truth")
    return aggregate(positional_error(est, gt), angular_error(est, gt), times_ms, config)
