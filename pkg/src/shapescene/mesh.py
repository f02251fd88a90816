"""Triangle meshes: OBJ I/O, canonicalization, surface sampling, containment.

Containment uses parity ray casting along the three grid axes with a majority
vote, which tolerates small cracks in near-watertight input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMesh, NonWatertight
from .geom import Pose9DoF, apply_pose, inverse_apply_pose

# Fixed sub-voxel jitter applied to ray origins so rays never pass exactly
# through triangle edges of axis-aligned fixtures. Irrational, deterministic.
_RAY_JITTER = 1e-9 * np.sqrt(2.0)

# Fraction of voxels on which the three parity votes may disagree before the
# mesh is rejected as non-watertight.
WATERTIGHT_DISAGREEMENT = 0.01


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh. `vertices` is (n, 3) float, `triangles` (m, 3) int."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        t = np.asarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("vertices must be (n, 3)")
        if t.ndim != 2 or t.shape[1] != 3 or len(t) < 1:
            raise ValueError("triangles must be (m, 3) with m >= 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices contain non-finite values")
        if t.min() < 0 or t.max() >= len(v):
            raise ValueError("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    def corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v, t = self.vertices, self.triangles
        return v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]

    def triangle_areas(self) -> np.ndarray:
        p0, p1, p2 = self.corners()
        return 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def load_obj(path) -> TriMesh:
    """Read an ASCII OBJ (v/f records, 1-based indices, fan-triangulated)."""
    vertices: list[list[float]] = []
    triangles: list[list[int]] = []
    with open(path, "r") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                for k in range(1, len(idx) - 1):
                    triangles.append([idx[0], idx[k], idx[k + 1]])
    if not vertices or not triangles:
        raise DegenerateMesh(f"{path}: no v/f records")
    return TriMesh(np.array(vertices), np.array(triangles))


def save_obj(path, mesh: TriMesh) -> None:
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def canonicalize_mesh(mesh: TriMesh) -> TriMesh:
    """Anisotropically fit the mesh into the unit cube [-0.5, 0.5]^3.

    Each axis is scaled independently so the extents span exactly 1, and the
    bounding-box center is moved to the origin. Orientation is taken as-given.
    """
    lo, hi = mesh.bounds()
    extent = hi - lo
    if np.any(extent < 1e-12):
        raise DegenerateMesh(f"axis extent below 1e-12: {extent}")
    center = (lo + hi) / 2.0
    verts = (mesh.vertices - center) / extent
    return TriMesh(verts, mesh.triangles)


def sample_surface_points(mesh: TriMesh, n: int, seed: int) -> np.ndarray:
    """Draw n points area-uniformly from the mesh surface. Deterministic per seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    areas = mesh.triangle_areas()
    total = areas.sum()
    if total <= 0:
        raise DegenerateMesh("total surface area is zero")
    rng = np.random.default_rng(seed)
    tri = rng.choice(len(areas), size=n, p=areas / total)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    p0, p1, p2 = mesh.corners()
    return p0[tri] + u[:, None] * (p1[tri] - p0[tri]) + v[:, None] * (p2[tri] - p0[tri])


def _parity_along_axis(mesh: TriMesh, points: np.ndarray, axis: int) -> np.ndarray:
    """Odd crossing parity of +axis rays from each point (True = inside)."""
    b_ax, c_ax = [a for a in range(3) if a != axis]
    p0, p1, p2 = mesh.corners()
    q = points.copy()
    q[:, b_ax] += _RAY_JITTER
    q[:, c_ax] += _RAY_JITTER * np.sqrt(3.0)

    count = np.zeros(len(points), dtype=np.int64)
    for t in range(len(p0)):
        e1 = p1[t] - p0[t]
        e2 = p2[t] - p0[t]
        denom = e1[b_ax] * e2[c_ax] - e1[c_ax] * e2[b_ax]
        if abs(denom) < 1e-15:
            continue  # ray parallel to the triangle plane
        db = q[:, b_ax] - p0[t][b_ax]
        dc = q[:, c_ax] - p0[t][c_ax]
        alpha = (db * e2[c_ax] - dc * e2[b_ax]) / denom
        beta = (e1[b_ax] * dc - e1[c_ax] * db) / denom
        hit = (alpha >= 0.0) & (beta >= 0.0) & (alpha + beta <= 1.0)
        if not hit.any():
            continue
        x_int = p0[t][axis] + alpha * e1[axis] + beta * e2[axis]
        count += hit & (x_int > q[:, axis])
    return (count % 2).astype(bool)


def points_inside(mesh: TriMesh, points: np.ndarray) -> tuple[np.ndarray, float]:
    """Majority-vote containment for arbitrary points.

    Returns (inside mask, fraction of points where the three axis votes
    disagree). Callers decide whether the disagreement is fatal.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    votes = np.stack([_parity_along_axis(mesh, points, a) for a in range(3)])
    total = votes.sum(axis=0)
    inside = total >= 2
    disagree = float(np.mean((total != 0) & (total != 3))) if len(points) else 0.0
    return inside, disagree


def require_watertight(disagreement: float) -> None:
    if disagreement > WATERTIGHT_DISAGREEMENT:
        raise NonWatertight(
            f"parity votes disagree on {disagreement * 100:.2f}% of samples"
        )


def voxelize_occupancy(
    mesh: TriMesh,
    pose: Pose9DoF,
    origin: np.ndarray,
    dims: tuple[int, int, int],
    spacing: float,
) -> np.ndarray:
    """Boolean occupancy: voxel center inside the posed mesh.

    `origin` is the world position of voxel (0, 0, 0)'s center; cubic voxels.
    Only voxels inside the posed mesh's bounding box are ray-tested.
    """
    origin = np.asarray(origin, dtype=np.float64)
    nx, ny, nz = dims
    occ = np.zeros((nx, ny, nz), dtype=bool)

    world_verts = apply_pose(pose, mesh.vertices)
    lo = world_verts.min(axis=0)
    hi = world_verts.max(axis=0)
    i_lo = np.maximum(np.ceil((lo - origin) / spacing - 0.5).astype(int), 0)
    i_hi = np.minimum(np.floor((hi - origin) / spacing + 0.5).astype(int), np.array(dims) - 1)
    if np.any(i_lo > i_hi):
        return occ

    axes = [origin[a] + spacing * np.arange(i_lo[a], i_hi[a] + 1) for a in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    canon = inverse_apply_pose(pose, centers)
    inside, disagreement = points_inside(mesh, canon)
    require_watertight(disagreement)
    occ[i_lo[0]:i_hi[0] + 1, i_lo[1]:i_hi[1] + 1, i_lo[2]:i_hi[2] + 1] = inside.reshape(
        i_hi[0] - i_lo[0] + 1, i_hi[1] - i_lo[1] + 1, i_hi[2] - i_lo[2] + 1
    )
    return occ


def point_triangle_distance(points: np.ndarray, mesh: TriMesh) -> np.ndarray:
    """Unsigned distance from each point to the nearest mesh triangle."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    p0s, p1s, p2s = mesh.corners()
    best = np.full(len(points), np.inf)
    for t in range(len(p0s)):
        p0, p1, p2 = p0s[t], p1s[t], p2s[t]
        e1 = p1 - p0
        e2 = p2 - p0
        a = e1 @ e1
        b = e1 @ e2
        c = e2 @ e2
        det = a * c - b * b
        d = points - p0
        d1 = d @ e1
        d2 = d @ e2
        if det > 1e-15:
            alpha = (c * d1 - b * d2) / det
            beta = (a * d2 - b * d1) / det
            interior = (alpha >= 0) & (beta >= 0) & (alpha + beta <= 1)
            closest = p0 + alpha[:, None] * e1 + beta[:, None] * e2
            dist = np.linalg.norm(points - closest, axis=1)
        else:
            interior = np.zeros(len(points), dtype=bool)
            dist = np.zeros(len(points))
        edge = np.minimum(
            _point_segment_distance(points, p0, p1),
            np.minimum(
                _point_segment_distance(points, p1, p2),
                _point_segment_distance(points, p0, p2),
            ),
        )
        best = np.minimum(best, np.where(interior, dist, edge))
    return best


def _point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = ab @ ab
    if denom < 1e-30:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)
