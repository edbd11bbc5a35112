"""File formats: point maps, trajectories, scan archives, reports.

Maps are plain XYZ text (three columns, ``#`` comments) or the ASCII subset
of PCD.  Trajectories are ``step x y z roll pitch yaw`` rows.  A scan
archive is a directory holding one XYZ file per step and an ``index.txt``
listing ``step filename n_points``.
"""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from .geometry import ScanFrame, wrap_pose_array

SCAN_INDEX = "index.txt"


class FormatError(ValueError):
    """A file exists but its contents do not parse."""


def _loadtxt(path, ncols: int) -> np.ndarray:
    try:
        with warnings.catch_warnings():
            # empty files are legal (a scan with no returns)
            warnings.filterwarnings("ignore", "loadtxt: input contained no data")
            data = np.loadtxt(path, comments="#", ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if data.size == 0:
        return np.empty((0, ncols))
    if data.shape[1] != ncols:
        raise FormatError(f"{path}: expected {ncols} columns, found {data.shape[1]}")
    return data


def _read_pcd(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    fields, n_points = None, None
    for i, line in enumerate(lines):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        key = parts[0].upper()
        if key == "FIELDS":
            fields = [p.lower() for p in parts[1:]]
        elif key == "POINTS":
            n_points = int(parts[1])
        elif key == "DATA":
            if len(parts) < 2 or parts[1].lower() != "ascii":
                raise FormatError(f"{path}: only ASCII PCD data is supported")
            body = lines[i + 1:]
            break
    else:
        raise FormatError(f"{path}: missing DATA line")
    if fields is None or not {"x", "y", "z"} <= set(fields):
        raise FormatError(f"{path}: FIELDS must include x y z")
    cols = [fields.index(c) for c in "xyz"]
    rows = [r.split() for r in body if r.strip()]
    try:
        data = np.array([[float(r[c]) for c in cols] for r in rows]).reshape(-1, 3)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: bad PCD row ({exc})") from exc
    if n_points is not None and n_points != len(data):
        raise FormatError(f"{path}: header says {n_points} points, found {len(data)}")
    return data


def read_map(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".pcd":
        pts = _read_pcd(path)
    else:
        pts = _loadtxt(path, 3)
    if len(pts) == 0:
        raise FormatError(f"{path}: no points")
    return pts


def write_map(path, points) -> None:
    path = Path(path)
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if path.suffix.lower() == ".pcd":
        header = (
            "# .PCD v0.7\nVERSION 0.7\nFIELDS x y z\nSIZE 8 8 8\nTYPE F F F\nCOUNT 1 1 1\n"
            f"WIDTH {len(pts)}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {len(pts)}\nDATA ascii\n"
        )
        rows = "".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts.tolist())
        path.write_text(header + rows)
    else:
        np.savetxt(path, pts, fmt="%.17g")


def read_trajectory(path):
    """Return ``(steps, poses)``; ``poses`` has shape ``(T, 6)``."""
    data = _loadtxt(path, 7)
    steps = data[:, 0]
    if np.any(steps != np.round(steps)):
        raise FormatError(f"{path}: step column must hold integers")
    return steps.astype(int), wrap_pose_array(data[:, 1:])


def write_trajectory(path, poses, steps=None, comment: str | None = None) -> None:
    poses = np.asarray(poses, dtype=float).reshape(-1, 6)
    steps = np.arange(len(poses)) if steps is None else np.asarray(steps, dtype=int)
    lines = ["# step x y z roll pitch yaw"]
    if comment:
        lines += [f"# {c}" for c in comment.splitlines()]
    lines += [" ".join([str(int(s))] + [repr(float(v)) for v in p]) for s, p in zip(steps, poses)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_scan_archive(directory, scans) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    index = []
    for t, scan in enumerate(scans):
        name = f"{t:06d}.xyz"
        np.savetxt(d / name, scan.points, fmt="%.17g")
        index.append(f"{t} {name} {len(scan)}")
    (d / SCAN_INDEX).write_text("# step file n_points\n" + "\n".join(index) + "\n")


def read_scan_archive(directory) -> list:
    d = Path(directory)
    entries = []
    for line in (d / SCAN_INDEX).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"{d / SCAN_INDEX}: bad index row {line!r}")
        entries.append((int(parts[0]), parts[1], int(parts[2])))
    entries.sort()
    scans = []
    for t, name, n in entries:
        pts = _loadtxt(d / name, 3)
        if len(pts) != n:
            raise FormatError(f"{d / name}: index says {n} points, found {len(pts)}")
        scans.append(ScanFrame.from_points(pts))
    return scans


def write_odometry(path, deltas) -> None:
    """Per-step motion deltas; row ``t`` is the motion from step ``t`` to ``t + 1``."""
    write_trajectory(path, deltas, comment="odometry deltas: row t moves step t to t+1")


def read_odometry(path) -> np.ndarray:
    return read_trajectory(path)[1]


def write_report(path, report) -> None:
    Path(path).write_text(report.to_csv())
