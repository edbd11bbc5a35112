"""End-to-end acceptance criteria on synthetic worlds.

Every test records one PASS/FAIL line (see the terminal summary).  The
runs are shared through module caches, so the long tracking experiments
are simulated and filtered once per seed.
"""

import time
from functools import lru_cache

import numpy as np
import pytest
from scipy.spatial import cKDTree

from pffloc.distance_field import build
from pffloc.filters import FilterParams, Settings
from pffloc.measurement import ModelParams
from pffloc.geometry import ScanFrame
from pffloc.optimizer import OptimizerParams, gauss_newton, numerical_jacobian, residual_vector
from pffloc.particles import effective_sample_size, sample_measurement_particles, systematic_indices
from pffloc.pipeline import disturbance_schedule, run_localization
from pffloc.simulator import PRESETS, ScanSimParams, generate_world, simulate_run, simulate_scan

pytestmark = pytest.mark.acceptance

SEEDS = range(10)
STEPS = 200
ODOM_COV = np.diag([0.05**2] * 3 + [0.01**2] * 3)

# library defaults everywhere except the two knobs below; both are discussed in the
# README's "Known limitations" section
OPT = OptimizerParams(delta_conv=1e-4)
TRACK = Settings(optimizer=OPT, filter=FilterParams(sigma_o_sq=100.0))
LFM_MODEL = ModelParams(z_max=120.0)


@lru_cache(maxsize=None)
def _scenario(seed, unknown_fraction):
    sim = simulate_run(seed, "corridor", STEPS, ScanSimParams(1000, 0.02, unknown_fraction, 30.0),
                       density=50.0, odom_cov=ODOM_COV)
    return sim, build(sim.world.map_points, 0.2, margin=1.0)


def _run(seed, method, unknown_fraction=0.2, disturb=False, settings=TRACK):
    sim, field = _scenario(seed, unknown_fraction)
    dist = disturbance_schedule(STEPS, 10, 1.0, seed) if disturb else None
    return run_localization(sim.scans, sim.ground_truth[0], field, settings, method, seed,
                            odometry=sim.odometry, disturbances=dist, ground_truth=sim.ground_truth)


_RUNS = {}


def _cached(key, *args, **kwargs):
    if key not in _RUNS:
        _RUNS[key] = _run(*args, **kwargs)
    return _RUNS[key]


def _pff(seed):
    return _cached(("pff", seed), seed, "pff")


def _lfm_settings():
    return Settings(model=LFM_MODEL, optimizer=OPT, filter=TRACK.filter)


def test_1_distance_field_fidelity(criterion_log):
    worst, slowest = 0.0, 0.0
    ok = True
    for preset in PRESETS:
        for seed in range(3):
            world = generate_world(seed, preset, density=50.0)
            t0 = time.perf_counter()
            field = build(world.map_points, 0.2, margin=1.0)
            slowest = max(slowest, time.perf_counter() - t0)
            q = np.random.default_rng(seed).uniform(field.origin, field.upper, (1000, 3))
            err = np.abs(field.query(q) - cKDTree(world.map_points).query(q)[0]).max()
            worst = max(worst, err)
            ok &= err <= field.resolution
    ok &= slowest < 5.0
    criterion_log(1, ok, f"max |error| {worst:.4f} m (res 0.2), slowest build {slowest:.2f} s")
    assert ok


def _central_difference(pose, scan, field, mp, step):
    J = np.empty((len(scan), 6))
    for j in range(6):
        d = np.zeros(6)
        d[j] = step[j]
        J[:, j] = (residual_vector(pose + d, scan, field, mp)[0]
                   - residual_vector(pose - d, scan, field, mp)[0]) / (2 * step[j])
    return J


def test_2_jacobian_correctness(criterion_log):
    world = generate_world(0, "room", density=50.0)
    field = build(world.map_points, 0.1, margin=1.0)
    rng = np.random.default_rng(2)
    mp = ModelParams()
    checked = bad = poses_ok = 0
    worst = 0.0
    for _ in range(100):
        gt = np.array([*rng.uniform([2.5, 2.5, 0.8], [7.5, 7.5, 1.8]), *rng.uniform(-0.05, 0.05, 2),
                       rng.uniform(-np.pi, np.pi)])
        scan = simulate_scan(gt, world, ScanSimParams(300, 0.0, 0.0, 30.0), rng)
        pose = gt + np.concatenate([rng.uniform(-0.2, 0.2, 3), rng.uniform(-0.03, 0.03, 3)])
        _, active = residual_vector(pose, scan, field, mp)
        J = numerical_jacobian(pose, scan, field, mp, OPT, active=active)
        oracle = _central_difference(pose, ScanFrame(scan.points[active], scan.ranges[active]), field, mp,
                                     OPT.steps / 10)
        mask = np.abs(J) > 1e-4
        rel = np.abs(J[mask] - oracle[mask]) / np.abs(J[mask])
        checked += mask.sum()
        bad += int(np.sum(rel > 0.05))
        poses_ok += int(np.all(rel <= 0.05))
        worst = max(worst, rel.max(initial=0.0))
    ok = bad == 0
    criterion_log(2, ok, f"{checked - bad}/{checked} entries within 5% "
                         f"({poses_ok}/100 poses clean), worst relative error {worst:.2f}")
    assert ok


def test_3_optimizer_recovery(criterion_log):
    ok_trials, its = 0, []
    for seed in range(100):
        world = generate_world(seed, "room", density=100.0)
        field = build(world.map_points, 0.05, margin=1.0)
        rng = np.random.default_rng(1000 + seed)
        gt = np.array([rng.uniform(3, 7), rng.uniform(3, 7), 1.2, 0, 0, rng.uniform(-np.pi, np.pi)])
        scan = simulate_scan(gt, world, ScanSimParams(500, 0.0, 0.0, 30.0), rng)
        pert = np.concatenate([rng.uniform(-0.3, 0.3, 3), np.radians(rng.uniform(-1, 1, 3) * [2, 2, 5])])
        res = gauss_newton(gt + pert, scan, field, ModelParams(), OPT)
        d = res.pose_opt.as_array() - gt
        d[3:] = np.angle(np.exp(1j * d[3:]))
        its.append(res.iterations)
        ok_trials += (res.converged and res.iterations <= 30 and np.linalg.norm(d[:3]) < 0.05
                      and np.degrees(np.abs(d[3:])).max() < 0.5)
    ok = ok_trials >= 95
    criterion_log(3, ok, f"{ok_trials}/100 recovered, mean iterations {np.mean(its):.1f}")
    assert ok


def test_4_sampling_statistics(criterion_log):
    n = 100_000
    A = np.random.default_rng(40).normal(size=(6, 6))
    cov = A @ A.T * 0.01 + np.diag([0.04, 0.01, 0.02, 0.001, 0.002, 0.003])
    mean = np.array([1.0, -2.0, 0.5, 0.1, -0.1, 0.2])
    ps = sample_measurement_particles(mean, cov, n, np.random.default_rng(41))
    sigma = np.sqrt(np.diag(cov))
    mean_ok = np.all(np.abs(ps.poses.mean(axis=0) - mean) < 4 * sigma / np.sqrt(n))
    frob = np.linalg.norm(np.cov(ps.poses.T) - cov) / np.linalg.norm(cov)
    ok = bool(mean_ok and frob < 0.05)
    criterion_log(4, ok, f"mean within 4 sigma/sqrt(n): {bool(mean_ok)}, covariance Frobenius error {frob:.4f}")
    assert ok


def test_5_filter_algebra(criterion_log):
    rng = np.random.default_rng(50)
    failures = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 400))
        w = rng.exponential(size=n) ** rng.uniform(0.5, 6)
        w /= w.sum()
        ess = effective_sample_size(w)
        m = int(rng.integers(1, 600))
        counts = np.bincount(systematic_indices(w, m, rng.uniform()), minlength=n)
        failures += not (abs(w.sum() - 1) < 1e-9 and 1 - 1e-9 <= ess <= n + 1e-9 and counts.sum() == m
                         and np.all(counts >= np.floor(m * w) - 1e-9) and np.all(counts <= np.ceil(m * w) + 1e-9))
    ok = failures == 0
    criterion_log(5, ok, f"{10_000 - failures}/10000 weight vectors satisfy every invariant")
    assert ok


def test_6_pff_tracking_without_ins(criterion_log):
    rows = []
    for seed in SEEDS:
        r = _pff(seed).report
        rows.append((r.pos_mean, r.ang_mean, r.pos_mean < 0.30 and r.ang_mean < 1.5 and not r.tracking_failed))
    passed = sum(p for *_, p in rows)
    ok = passed >= 9
    detail = ", ".join(f"{p:.2f}m/{a:.2f}deg" for p, a, _ in rows)
    criterion_log(6, ok, f"{passed}/10 seeds within 0.30 m / 1.5 deg [{detail}]")
    assert ok


def test_7_spf_contrast(criterion_log):
    no_odom = [_cached(("spf", s), s, "spf").report.tracking_failed for s in SEEDS]
    with_odom = [_cached(("spf_odom", s), s, "spf_odom").report.tracking_failed for s in SEEDS]
    failed, tracked = sum(no_odom), sum(not f for f in with_odom)
    ok = failed >= 7 and tracked >= 8
    criterion_log(7, ok, f"without odometry {failed}/10 failed, with odometry {tracked}/10 tracked")
    assert ok


def test_8_class_conditional_vs_lfm(criterion_log):
    wins, rows = 0, []
    for seed in SEEDS:
        mmo = _cached(("mmo30", seed), seed, "mmo", unknown_fraction=0.3).report.pos_mean
        lfm = _cached(("lfm30", seed), seed, "mmolfm", unknown_fraction=0.3, settings=_lfm_settings()).report.pos_mean
        wins += mmo <= lfm
        rows.append(f"{mmo:.2f}<={lfm:.2f}" if mmo <= lfm else f"{mmo:.2f}>{lfm:.2f}")
    ok = wins >= 8
    criterion_log(8, ok, f"class-conditional no worse in {wins}/10 seeds [{', '.join(rows)}]")
    assert ok


def test_9_robustness_to_disturbance(criterion_log):
    pff_ok, ratios = 0, []
    mmo_clean, mmo_hit = [], []
    for seed in SEEDS:
        base = _pff(seed).report
        hit = _cached(("pff_dist", seed), seed, "pff", disturb=True).report
        ratio = hit.pos_mean / base.pos_mean
        ratios.append(ratio)
        pff_ok += ratio < 2.0 and not hit.tracking_failed
        mmo_clean.append(_cached(("mmo", seed), seed, "mmo").report.pos_mean)
        mmo_hit.append(_cached(("mmo_dist", seed), seed, "mmo", disturb=True).report.pos_mean)
    mmo_ratio = np.mean(mmo_hit) / np.mean(mmo_clean)
    ok = pff_ok == len(SEEDS) and mmo_ratio > 2.0
    criterion_log(9, ok, f"PFF degradation < 2x and tracking on {pff_ok}/10 seeds "
                         f"(ratios {min(ratios):.1f}..{max(ratios):.1f}); MMO degradation {mmo_ratio:.1f}x")
    assert ok


def test_10_pff_step_time(criterion_log):
    times = np.concatenate([_pff(seed).times_ms[1:] for seed in SEEDS])
    mean = float(np.mean(times))
    ok = mean < 100.0
    criterion_log(10, ok, f"mean step time {mean:.1f} ms, p95 {np.percentile(times, 95):.1f} ms, "
                          f"M=L=1000, one thread")
    assert ok


def test_11_determinism(criterion_log):
    pairs = [
        (_pff(0), _run(0, "pff")),
        (_cached(("spf", 0), 0, "spf"), _run(0, "spf")),
        (_cached(("spf_odom", 0), 0, "spf_odom"), _run(0, "spf_odom")),
        (_cached(("mmo30", 0), 0, "mmo", unknown_fraction=0.3), _run(0, "mmo", unknown_fraction=0.3)),
        (_cached(("lfm30", 0), 0, "mmolfm", unknown_fraction=0.3, settings=_lfm_settings()),
         _run(0, "mmolfm", unknown_fraction=0.3, settings=_lfm_settings())),
        (_cached(("pff_dist", 0), 0, "pff", disturb=True), _run(0, "pff", disturb=True)),
        (_cached(("mmo_dist", 0), 0, "mmo", disturb=True), _run(0, "mmo", disturb=True)),
    ]
    same = sum(a.estimates.tobytes() == b.estimates.tobytes()
               and a.report.to_csv().split("\n")[0] == b.report.to_csv().split("\n")[0] for a, b in pairs)
    ok = same == len(pairs)
    criterion_log(11, ok, f"{same}/{len(pairs)} seed-0 reruns byte-identical")
    assert ok
