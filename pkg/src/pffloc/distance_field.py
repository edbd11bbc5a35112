"""Voxelized Euclidean distance field over a point-cloud map.

The field stores, at every voxel center, the distance to the nearest map
point.  Nearest seed voxels come from an exact separable Euclidean distance
transform; the stored value is then the true distance from the voxel center
to the representative map point of that seed voxel, which removes the
half-voxel bias a pure voxel-center transform would have.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

DEFAULT_VOXEL_BUDGET = 200_000_000
_MAGIC = b"VDF1"
_HEADER = struct.Struct("<4s3dd3Id")


class FieldCapacityError(ValueError):
    """Requested grid exceeds the voxel budget."""


class FieldFormatError(ValueError):
    """A stored field file is truncated or not in VDF1 format."""


@dataclass(frozen=True, eq=False)
class VoxelDistanceField:
    origin: np.ndarray
    resolution: float
    dims: tuple
    distances: np.ndarray  # float32, shape dims, indexed [ix, iy, iz]
    max_distance: float

    def __post_init__(self):
        # queries gather from a flat C-ordered view
        object.__setattr__(self, "distances", np.ascontiguousarray(self.distances, dtype=np.float32))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def upper(self) -> np.ndarray:
        return self.origin + np.asarray(self.dims) * self.resolution

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.dims))

    def voxel_center(self, index) -> np.ndarray:
        return self.origin + (np.asarray(index, dtype=float) + 0.5) * self.resolution

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= self.origin) & (p <= self.upper), axis=1)

    def query(self, points) -> np.ndarray:
        """Trilinear distance lookup for ``(K, 3)`` points.

        Points outside the field get ``max_distance``.
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(p), self.max_distance)
        inside = self.contains(p)
        if not inside.any():
            return out
        g = (p[inside] - self.origin) / self.resolution - 0.5
        dims = np.asarray(self.dims)
        hi = dims - 1
        i0 = np.clip(np.floor(g).astype(np.intp), 0, np.maximum(hi - 1, 0))
        f = np.clip(g - i0, 0.0, 1.0)
        # gather from the flat C-ordered grid; a one-voxel axis has no neighbour
        strides = np.array([dims[1] * dims[2], dims[2], 1])
        sx, sy, sz = np.where(dims > 1, strides, 0)
        base = i0 @ strides
        flat = self.distances.reshape(-1)
        fx, fy, fz = f.T
        c00 = flat.take(base) * (1 - fx) + flat.take(base + sx) * fx
        c10 = flat.take(base + sy) * (1 - fx) + flat.take(base + sy + sx) * fx
        c01 = flat.take(base + sz) * (1 - fx) + flat.take(base + sz + sx) * fx
        c11 = flat.take(base + sy + sz) * (1 - fx) + flat.take(base + sy + sz + sx) * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        out[inside] = c0 * (1 - fz) + c1 * fz
        return out

    def query_point(self, p) -> float:
        return float(self.query(np.asarray(p, dtype=float).reshape(1, 3))[0])

    def save(self, path) -> None:
        header = _HEADER.pack(
            _MAGIC, *map(float, self.origin), float(self.resolution),
            *map(int, self.dims), float(self.max_distance),
        )
        body = np.asarray(self.distances, dtype="<f4").ravel(order="F").tobytes()
        Path(path).write_bytes(header + body)

    @classmethod
    def load(cls, path) -> "VoxelDistanceField":
        raw = Path(path).read_bytes()
        if len(raw) < _HEADER.size:
            raise FieldFormatError(f"{path}: truncated field header")
        magic, ox, oy, oz, res, nx, ny, nz, max_d = _HEADER.unpack_from(raw)
        if magic != _MAGIC:
            raise FieldFormatError(f"{path}: bad magic {magic!r}")
        n = nx * ny * nz
        if len(raw) < _HEADER.size + 4 * n:
            raise FieldFormatError(f"{path}: field body holds fewer than {n} voxels")
        body = np.frombuffer(raw, dtype="<f4", count=n, offset=_HEADER.size)
        dist = body.reshape((nx, ny, nz), order="F").astype(np.float32)
        return cls(np.array([ox, oy, oz]), res, (nx, ny, nz), dist, max_d)


def build(map_points, resolution: float, margin: float = 0.0, max_distance: float | None = None,
          voxel_budget: int = DEFAULT_VOXEL_BUDGET) -> VoxelDistanceField:
    """Build a distance field covering the map bounding box grown by ``margin``."""
    pts = np.asarray(map_points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("cannot build a distance field from an empty map")
    if resolution <= 0 or margin < 0:
        raise ValueError("resolution must be > 0 and margin >= 0")
    if not np.all(np.isfinite(pts)):
        raise ValueError("map contains non-finite points")

    origin = pts.min(axis=0) - margin
    extent = pts.max(axis=0) + margin - origin
    dims = tuple(int(n) for n in np.floor(extent / resolution).astype(np.int64) + 1)
    n_voxels = int(np.prod(np.asarray(dims, dtype=np.int64)))
    if n_voxels > voxel_budget:
        raise FieldCapacityError(
            f"grid {dims[0]}x{dims[1]}x{dims[2]} = {n_voxels} voxels exceeds budget {voxel_budget}")

    idx = np.floor((pts - origin) / resolution).astype(np.intp)
    idx = np.minimum(idx, np.asarray(dims) - 1)
    flat = np.ravel_multi_index(idx.T, dims)

    # representative point per occupied voxel: the one closest to the voxel center
    centers = origin + (idx + 0.5) * resolution
    off = np.sum((pts - centers) ** 2, axis=1)
    order = np.lexsort((off, flat))
    first = np.ones(len(order), dtype=bool)
    first[1:] = flat[order][1:] != flat[order][:-1]
    rep_flat = flat[order][first]
    rep_pts = pts[order][first]

    rep_of = np.full(n_voxels, -1, dtype=np.int64)
    rep_of[rep_flat] = np.arange(len(rep_flat))
    free = np.ones(dims, dtype=bool)
    free.flat[rep_flat] = False

    nearest = ndimage.distance_transform_edt(free, return_distances=False, return_indices=True)
    nearest_flat = np.ravel_multi_index(tuple(nearest), dims).ravel()
    del nearest

    dist = np.empty(n_voxels)
    chunk = 1 << 20
    for s in range(0, n_voxels, chunk):
        ids = np.arange(s, min(s + chunk, n_voxels))
        centers_blk = origin + (np.stack(np.unravel_index(ids, dims), axis=1) + 0.5) * resolution
        dist[s:s + chunk] = np.linalg.norm(centers_blk - rep_pts[rep_of[nearest_flat[ids]]], axis=1)

    if max_distance is None:
        max_distance = float(np.linalg.norm(np.asarray(dims) * resolution))
    dist = np.minimum(dist, max_distance).reshape(dims).astype(np.float32)
    return VoxelDistanceField(origin, float(resolution), dims, dist, float(max_distance))


def brute_force_distance(map_points, queries, chunk: int = 256) -> np.ndarray:
    """Exact nearest-map-point distances by exhaustive search. Test oracle."""
    m = np.asarray(map_points, dtype=float)
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    out = np.empty(len(q))
    for s in range(0, len(q), chunk):
        blk = q[s:s + chunk]
        d2 = (np.sum(blk**2, axis=1)[:, None] + np.sum(m**2, axis=1)[None, :]
              - 2.0 * blk @ m.T)
        out[s:s + chunk] = np.sqrt(np.maximum(d2.min(axis=1), 0.0))
    return out
