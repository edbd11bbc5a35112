"""Run a tracker over a sequence of scans."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .evaluation import RunReport, evaluate_trajectory
from .filters import Settings, initialize, step_ekf, step_mmo, step_pff, step_spf
from .measurement import Model

METHODS = ("pff", "mmo", "mmolfm", "spf", "spf_odom", "ekf")


@dataclass
class RunResult:
    estimates: np.ndarray
    times_ms: np.ndarray
    optimizer_failures: int
    report: RunReport | None = None


def disturbance_schedule(n_steps: int, every: int, magnitude: float, seed: int) -> dict:
    """Random position offsets of fixed length on every ``every``-th step."""
    if every <= 0 or magnitude <= 0:
        return {}
    rng = np.random.default_rng(seed)
    out = {}
    for t in range(every, n_steps, every):
        d = rng.normal(size=3)
        out[t] = np.concatenate([magnitude * d / np.linalg.norm(d), np.zeros(3)])
    return out


def run_localization(scans, initial_pose, field, settings: Settings, method: str = "pff", seed: int = 0,
                     odometry=None, disturbances=None, ground_truth=None) -> RunResult:
    """Track from ``initial_pose`` over ``scans``; step 0 reports the initial pose.

    ``odometry[t-1]`` is the motion from step ``t-1`` to ``t`` and is used by
    ``spf_odom`` only.  ``disturbances`` maps step -> 6-vector added to the
    optimized pose (optimizer-based methods only).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if method == "spf_odom" and odometry is None:
        raise ValueError("spf_odom needs odometry")
    disturbances = disturbances or {}
    state = initialize(initial_pose, settings.filter, seed)
    estimates = [state.estimate.copy()]
    times = [0.0]
    failures = 0
    for t in range(1, len(scans)):
        scan = scans[t]
        dist = disturbances.get(t)
        start = time.perf_counter()
        if method == "pff":
            state = step_pff(state, scan, field, settings, disturbance=dist)
        elif method == "mmo":
            state = step_mmo(state, scan, field, settings, Model.CLASS_CONDITIONAL, disturbance=dist)
        elif method == "mmolfm":
            state = step_mmo(state, scan, field, settings, Model.LFM, disturbance=dist)
        elif method == "ekf":
            state = step_ekf(state, scan, field, settings, disturbance=dist)
        elif method == "spf":
            state = step_spf(state, scan, field, settings)
        else:
            state = step_spf(state, scan, field, settings, odometry=odometry[t - 1])
        times.append(1e3 * (time.perf_counter() - start))
        failures += int(state.optimizer_failed)
        estimates.append(state.estimate.copy())
    est = np.array(estimates)
    report = None
    if ground_truth is not None:
        report = evaluate_trajectory(est, ground_truth, times, {"method": method, "seed": seed})
    return RunResult(est, np.array(times), failures, report)
