"""Synthetic worlds, trajectories, LiDAR scans and odometry.

Every world is a set of axis-aligned rectangles sampled on a jittered grid
at a given areal density.  Structure that belongs to the map goes into
``map_points``; clutter objects (boxes and spheres) that the map does not
know about go into ``unknown_points``.

Draw order inside :func:`simulate_run`: world, then one scan per step in
step order, then the odometry noise.  All draws come from the generator
seeded with ``seed``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ScanFrame, normalize_angle, pose_delta, rotation_matrix, wrap_pose_array

PRESETS = ("room", "corridor", "urban_block")
MIN_POINTS_PER_FACE = 4


@dataclass(frozen=True, eq=False)
class WorldModel:
    map_points: np.ndarray
    unknown_points: np.ndarray
    bounds: tuple  # (lo, hi) arrays
    surface_area: float
    preset: str = ""


@dataclass(frozen=True)
class TrajectorySpec:
    waypoints: np.ndarray  # (W, 6)
    steps: int

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("a trajectory needs at least two waypoints")
        if self.steps < 2:
            raise ValueError("a trajectory needs at least two steps")


@dataclass(frozen=True)
class ScanSimParams:
    points_per_scan: int = 1000
    range_noise_std: float = 0.02
    unknown_fraction: float = 0.0
    max_range: float = 30.0
    dropout_prob: float = 0.0

    def __post_init__(self):
        if min(self.points_per_scan, self.range_noise_std, self.unknown_fraction,
               self.max_range, self.dropout_prob) < 0:
            raise ValueError("scan simulation parameters must be nonnegative")
        if self.unknown_fraction >= 1:
            raise ValueError("unknown_fraction must be < 1")


# -- surface sampling ---------------------------------------------------------

def _sample_rect(corner, u, v, density, rng):
    """Jittered grid over the rectangle ``corner + a*u + b*v``, ``a, b`` in [0, 1]."""
    lu, lv = np.linalg.norm(u), np.linalg.norm(v)
    area = lu * lv
    spacing = 1.0 / np.sqrt(density)
    nu = max(1, int(round(lu / spacing)))
    nv = max(1, int(round(lv / spacing)))
    a = (np.arange(nu)[:, None] + rng.uniform(size=(nu, nv))) / nu
    b = (np.arange(nv)[None, :] + rng.uniform(size=(nu, nv))) / nv
    pts = corner + a.reshape(-1, 1) * u + b.reshape(-1, 1) * v
    if len(pts) < MIN_POINTS_PER_FACE:
        ab = rng.uniform(size=(MIN_POINTS_PER_FACE, 2))
        pts = corner + ab[:, :1] * u + ab[:, 1:] * v
    return pts, area


def _box_faces(lo, hi, skip=()):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    ex = np.diag(hi - lo)
    faces = {
        "-x": (lo, ex[1], ex[2]), "+x": (lo + ex[0], ex[1], ex[2]),
        "-y": (lo, ex[0], ex[2]), "+y": (lo + ex[1], ex[0], ex[2]),
        "-z": (lo, ex[0], ex[1]), "+z": (lo + ex[2], ex[0], ex[1]),
    }
    return [f for k, f in faces.items() if k not in skip]


def _sample_boxes(boxes, density, rng):
    pts, area = [], 0.0
    for lo, hi, skip in boxes:
        for corner, u, v in _box_faces(lo, hi, skip):
            p, a = _sample_rect(corner, u, v, density, rng)
            pts.append(p)
            area += a
    return np.concatenate(pts), area


def _sample_sphere(center, radius, density, rng):
    n = max(MIN_POINTS_PER_FACE, int(round(4 * np.pi * radius**2 * density)))
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return np.asarray(center) + radius * d


def _clutter(rng, n, xy_lo, xy_hi, density, floor_z=0.0):
    """Compact unknown objects: boxes (carts, cars) and spheres (people-sized blobs)."""
    pts = []
    for _ in range(n):
        c = rng.uniform(xy_lo, xy_hi)
        if rng.uniform() < 0.5:
            size = rng.uniform([0.4, 0.4, 0.6], [0.9, 0.9, 1.6])
            lo = np.array([c[0] - size[0] / 2, c[1] - size[1] / 2, floor_z])
            p, _ = _sample_boxes([(lo, lo + size, ("-z",))], density, rng)
        else:
            r = rng.uniform(0.25, 0.5)
            p = _sample_sphere([c[0], c[1], floor_z + rng.uniform(0.5, 1.5)], r, density, rng)
        pts.append(p)
    return np.concatenate(pts) if pts else np.empty((0, 3))


def _room(rng, density):
    boxes = [((0, 0, 0), (10, 10, 3), ())]
    for _ in range(4):  # furniture against the walls
        w, d, h = rng.uniform([0.6, 0.4, 0.5], [1.8, 0.8, 2.0])
        side = rng.integers(4)
        s = rng.uniform(1.0, 9.0 - w)
        lo = [(s, 0, 0), (s, 10 - d, 0), (0, s, 0), (10 - d, s, 0)][side]
        size = [(w, d, h), (w, d, h), (d, w, h), (d, w, h)][side]
        boxes.append((np.array(lo, float), np.array(lo, float) + size, ("-z",)))
    c = rng.uniform(3.5, 6.5, size=2)
    boxes.append(((c[0] - 0.2, c[1] - 0.2, 0), (c[0] + 0.2, c[1] + 0.2, 3), ("-z", "+z")))
    pts, area = _sample_boxes(boxes, density, rng)
    unknown = _clutter(rng, 3, [1.5, 1.5], [8.5, 8.5], density)
    return pts, unknown, area


def _corridor(rng, density, length=50.0, width=4.0, height=3.0):
    boxes = [((0, 0, 0), (length, width, height), ())]
    x = 2.0
    while x < length - 2.0:  # pillars alternating sides, irregular spacing
        side = rng.integers(2)
        y0 = 0.0 if side == 0 else width - 0.35
        boxes.append(((x, y0, 0), (x + 0.4, y0 + 0.35, height), ("-z", "+z")))
        x += rng.uniform(2.5, 5.0)
    for _ in range(6):  # cabinets
        cx = rng.uniform(2.0, length - 3.0)
        side = rng.integers(2)
        d = rng.uniform(0.3, 0.5)
        y0 = 0.0 if side == 0 else width - d
        boxes.append(((cx, y0, 0), (cx + rng.uniform(0.8, 2.0), y0 + d, rng.uniform(0.8, 1.8)), ("-z",)))
    pts, area = _sample_boxes(boxes, density, rng)
    n_clutter = int(length // 4)
    lo_side = _clutter(rng, n_clutter // 2, [1.0, 0.7], [length - 1.0, 1.1], density)
    hi_side = _clutter(rng, n_clutter - n_clutter // 2, [1.0, width - 1.1], [length - 1.0, width - 0.7], density)
    return pts, np.concatenate([lo_side, hi_side]), area


def _urban_block(rng, density, size=60.0, street=10.0):
    half = (size - street) / 2.0
    boxes = [((0, 0, -0.01), (size, size, 0.0), ("-z", "-x", "+x", "-y", "+y"))]
    for bx in (0.0, half + street):
        for by in (0.0, half + street):
            h = rng.uniform(6.0, 15.0)
            inset = rng.uniform(0.5, 2.0, size=2)
            lo = np.array([bx + inset[0], by + inset[1], 0.0])
            hi = np.array([bx + half - inset[0], by + half - inset[1], h])
            boxes.append((lo, hi, ("-z",)))
    pts, area = _sample_boxes(boxes, density, rng)
    cars = []
    for _ in range(8):
        along = rng.uniform(5, size - 5)
        lane = half + rng.choice([1.5, street - 1.5])
        xy = (along, lane) if rng.uniform() < 0.5 else (lane, along)
        lo = np.array([xy[0] - 0.9, xy[1] - 0.9, 0.0])
        c, _ = _sample_boxes([(lo, lo + [1.8, 1.8, 1.5], ("-z",))], density, rng)
        cars.append(c)
    return pts, np.concatenate(cars), area


def generate_world(seed: int, preset: str = "room", density: float = 50.0) -> WorldModel:
    """Deterministic synthetic world.

    Each rectangle gets at least ``MIN_POINTS_PER_FACE`` points, so very low
    densities yield a sparse but valid map rather than an error.
    """
    if density <= 0:
        raise ValueError("density must be positive")
    rng = np.random.default_rng(seed)
    return _generate(rng, preset, density)


def _generate(rng, preset, density) -> WorldModel:
    builders = {"room": _room, "corridor": _corridor, "urban_block": _urban_block}
    if preset not in builders:
        raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")
    pts, unknown, area = builders[preset](rng, density)
    allp = np.concatenate([pts, unknown]) if len(unknown) else pts
    return WorldModel(pts, unknown, (allp.min(axis=0), allp.max(axis=0)), area, preset)


# -- trajectories -------------------------------------------------------------

def interpolate_trajectory(spec: TrajectorySpec) -> np.ndarray:
    """Ground-truth poses ``(steps, 6)``, piecewise linear in step index."""
    wp = wrap_pose_array(spec.waypoints)
    s = np.linspace(0.0, len(wp) - 1, spec.steps)
    seg = np.minimum(np.floor(s).astype(int), len(wp) - 2)
    t = (s - seg)[:, None]
    delta = pose_delta(wp[seg + 1], wp[seg])
    return wrap_pose_array(wp[seg] + t * delta)


def default_waypoints(preset: str, rng=None) -> np.ndarray:
    """A hand-shaped route through each preset, with mild roll/pitch wobble."""
    if preset == "room":
        xy = [(3.0, 3.0), (7.0, 3.2), (7.2, 7.0), (3.2, 7.0), (3.0, 3.4)]
    elif preset == "corridor":
        xy = [(4.0, 2.0), (12.0, 1.7), (20.0, 2.3), (28.0, 1.8), (36.0, 2.2), (44.0, 2.0)]
    elif preset == "urban_block":
        xy = [(8.0, 30.0), (30.0, 29.0), (31.0, 52.0), (31.0, 30.0), (52.0, 31.0)]
    else:
        raise ValueError(f"unknown preset {preset!r}")
    xy = np.asarray(xy)
    heading = np.arctan2(np.diff(xy[:, 1]), np.diff(xy[:, 0]))
    heading = np.append(heading, heading[-1])
    n = len(xy)
    wobble = np.zeros((n, 2)) if rng is None else rng.uniform(-0.02, 0.02, size=(n, 2))
    z = 1.2 if preset != "urban_block" else 1.7
    return np.column_stack([xy, np.full(n, z), wobble, heading])


# -- sensors ------------------------------------------------------------------

def simulate_scan(gt_pose, world: WorldModel, params: ScanSimParams, rng, return_labels=False):
    """Sample a scan at ``gt_pose``; points are returned in the sensor frame.

    Each point is drawn from the unknown clutter with probability
    ``unknown_fraction`` (if any clutter is in range), otherwise from the
    mapped structure.  There is no occlusion model.
    """
    pose = np.asarray(gt_pose, dtype=float)
    if hasattr(gt_pose, "as_array"):
        pose = gt_pose.as_array()
    t = pose[:3]
    known = world.map_points[np.linalg.norm(world.map_points - t, axis=1) <= params.max_range]
    unknown = world.unknown_points
    if len(unknown):
        unknown = unknown[np.linalg.norm(unknown - t, axis=1) <= params.max_range]
    if len(known) == 0 and len(unknown) == 0:
        raise ValueError("no world points within max_range of the pose")

    n_unknown = int(rng.binomial(params.points_per_scan, params.unknown_fraction))
    if len(unknown) == 0:
        n_unknown = 0
    n_known = params.points_per_scan - n_unknown
    if len(known) == 0:
        n_known = 0
    pk = known[rng.choice(len(known), n_known, replace=n_known > len(known))] if n_known else np.empty((0, 3))
    pu = unknown[rng.choice(len(unknown), n_unknown, replace=n_unknown > len(unknown))] if n_unknown else np.empty((0, 3))
    pts = np.concatenate([pk, pu])
    labels = np.concatenate([np.zeros(n_known, bool), np.ones(n_unknown, bool)])
    if params.range_noise_std > 0:
        pts = pts + rng.normal(0.0, params.range_noise_std, size=pts.shape)
    keep = rng.uniform(size=len(pts)) >= params.dropout_prob
    R = rotation_matrix(*pose[3:])
    local = (pts - t) @ R
    keep &= np.linalg.norm(local, axis=1) <= params.max_range
    scan = ScanFrame.from_points(local[keep])
    return (scan, labels[keep]) if return_labels else scan


def simulate_odometry(gt: np.ndarray, noise_cov, rng) -> np.ndarray:
    """Noisy per-step motion ``gt[t] - gt[t-1] + N(0, noise_cov)``, shape ``(T-1, 6)``."""
    gt = np.asarray(gt, dtype=float)
    if len(gt) < 2:
        raise ValueError("need at least two poses")
    deltas = pose_delta(gt[1:], gt[:-1])
    cov = np.asarray(noise_cov, dtype=float)
    if np.any(cov):
        deltas = deltas + rng.multivariate_normal(np.zeros(6), cov, size=len(deltas), method="cholesky")
    deltas[:, 3:] = normalize_angle(deltas[:, 3:])
    return deltas


@dataclass(frozen=True, eq=False)
class SimulatedRun:
    world: WorldModel
    ground_truth: np.ndarray
    scans: list
    odometry: np.ndarray
    labels: list


def simulate_run(seed: int, preset: str, steps: int, scan_params: ScanSimParams,
                 density: float = 50.0, odom_cov=None) -> SimulatedRun:
    """World, ground truth, scans and odometry as a pure function of the inputs."""
    rng = np.random.default_rng(seed)
    world = _generate(rng, preset, density)
    gt = interpolate_trajectory(TrajectorySpec(default_waypoints(preset, rng), steps))
    scans, labels = [], []
    for pose in gt:
        s, lab = simulate_scan(pose, world, scan_params, rng, return_labels=True)
        scans.append(s)
        labels.append(lab)
    cov = np.zeros((6, 6)) if odom_cov is None else np.asarray(odom_cov, float)
    odom = simulate_odometry(gt, cov, rng)
    return SimulatedRun(world, gt, scans, odom, labels)
