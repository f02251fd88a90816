"""Synthetic scene generation and serialization.

Scenes hold (class, exemplar, pose) triples. Generation places objects
upright on the ground plane z = 0 with random yaw, log-uniform scales and
rejection sampling until the pairwise voxel overlap is zero.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import PlacementFailure, UnknownClass
from .geom import Pose9DoF, Rotation, apply_pose, random_rotation, rotation_about_axis
from .mesh import voxelize_occupancy
from .shapedb import ShapeDatabase

DEFAULT_GROUND_BOUNDS = ((-1.5, 1.5), (-1.5, 1.5))
DEFAULT_SCALE_RANGE = (0.5, 1.5)
GENERATION_CHECK_RESOLUTION = 64


@dataclass(frozen=True)
class PlacedObject:
    class_name: str
    exemplar: int
    pose: Pose9DoF


@dataclass(frozen=True)
class Scene:
    seed: int
    objects: tuple[PlacedObject, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))


def scene_to_json(scene: Scene) -> str:
    """Serialize to the canonical scene schema with full-precision floats."""
    payload = {
        "seed": scene.seed,
        "objects": [
            {
                "class": o.class_name,
                "exemplar": o.exemplar,
                "R": [float(x) for x in o.pose.r.m.reshape(-1)],  # row-major
                "t": [float(x) for x in o.pose.t],
                "s": [float(x) for x in o.pose.s],
            }
            for o in scene.objects
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def scene_from_json(text: str) -> Scene:
    payload = json.loads(text)
    objects = []
    for o in payload["objects"]:
        r = Rotation(np.array(o["R"], dtype=np.float64).reshape(3, 3))
        objects.append(
            PlacedObject(
                class_name=o["class"],
                exemplar=int(o["exemplar"]),
                pose=Pose9DoF(r, np.array(o["t"]), np.array(o["s"])),
            )
        )
    return Scene(seed=int(payload["seed"]), objects=tuple(objects))


def save_scene(path, scene: Scene) -> None:
    with open(path, "w") as fh:
        fh.write(scene_to_json(scene))


def load_scene(path) -> Scene:
    with open(path) as fh:
        return scene_from_json(fh.read())


def scene_grid(bounds, resolution: int) -> tuple[np.ndarray, tuple[int, int, int], float]:
    """Cubic-voxel grid covering axis-aligned `bounds` ((lo, hi) per axis).

    The longest axis gets `resolution` voxels; others get proportionally fewer.
    Returns (origin of voxel (0,0,0)'s center, dims, spacing).
    """
    lo = np.array([b[0] for b in bounds], dtype=np.float64)
    hi = np.array([b[1] for b in bounds], dtype=np.float64)
    extent = hi - lo
    spacing = float(extent.max()) / resolution
    dims = tuple(int(np.ceil(e / spacing)) for e in extent)
    origin = lo + spacing / 2.0
    return origin, dims, spacing


def generate_scene(
    db: ShapeDatabase,
    n_objects: int,
    seed: int,
    bounds=DEFAULT_GROUND_BOUNDS,
    scale_range=DEFAULT_SCALE_RANGE,
    max_attempts: int = 1000,
) -> Scene:
    """Sample a collision-free scene of upright objects on the ground plane.

    Classes/exemplars uniform, yaw uniform in [0, 2pi), per-axis scales
    log-uniform in `scale_range`, x/y uniform in `bounds`, z chosen so the
    posed shape rests on z = 0. Deterministic per seed.
    """
    if n_objects < 1:
        raise ValueError("n_objects must be >= 1")
    rng = np.random.default_rng(seed)
    (x0, x1), (y0, y1) = bounds
    zmax = 2.0 * scale_range[1]
    check_bounds = ((x0 - 1.5, x1 + 1.5), (y0 - 1.5, y1 + 1.5), (0.0, zmax))
    origin, dims, spacing = scene_grid(check_bounds, GENERATION_CHECK_RESOLUTION)

    placed: list[PlacedObject] = []
    occupancies: list[np.ndarray] = []
    for _ in range(n_objects):
        for attempt in range(max_attempts):
            cls = int(rng.integers(db.class_count))
            exemplar = int(rng.integers(db.k_per_class))
            yaw = float(rng.uniform(0.0, 2.0 * np.pi))
            log_lo, log_hi = np.log(scale_range[0]), np.log(scale_range[1])
            s = np.exp(rng.uniform(log_lo, log_hi, size=3))
            x = float(rng.uniform(x0, x1))
            y = float(rng.uniform(y0, y1))
            rot = rotation_about_axis(np.array([0.0, 0.0, 1.0]), yaw)
            mesh = db.entry(cls, exemplar).mesh
            pose0 = Pose9DoF(rot, np.array([x, y, 0.0]), s)
            min_z = apply_pose(pose0, mesh.vertices)[:, 2].min()
            pose = Pose9DoF(rot, np.array([x, y, -min_z]), s)

            occ = voxelize_occupancy(mesh, pose, origin, dims, spacing)
            if all(not np.any(occ & prev) for prev in occupancies):
                placed.append(PlacedObject(db.classes[cls], exemplar, pose))
                occupancies.append(occ)
                break
        else:
            raise PlacementFailure(
                f"could not place object {len(placed)} in {max_attempts} attempts"
            )
    return Scene(seed=seed, objects=tuple(placed))


def perturb_pose(
    p: Pose9DoF,
    rot_deg: float,
    trans: float,
    scale_frac: float,
    seed: int,
) -> Pose9DoF:
    """Compose a random-axis rotation of exactly rot_deg degrees, a random
    translation of norm <= trans, and a per-axis scale factor within
    (1 +- scale_frac). Deterministic per seed."""
    if min(rot_deg, trans, scale_frac) < 0:
        raise ValueError("perturbation magnitudes must be >= 0")
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    while np.linalg.norm(axis) < 1e-12:
        axis = rng.normal(size=3)
    delta = rotation_about_axis(axis, np.deg2rad(rot_deg))
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    t = p.t + direction * rng.uniform(0.0, trans)
    u = rng.uniform(-scale_frac, scale_frac, size=3)
    return Pose9DoF(Rotation(delta.m @ p.r.m), t, p.s * (1.0 + u))


def class_id(db: ShapeDatabase, name: str) -> int:
    try:
        return db.classes.index(name)
    except ValueError:
        raise UnknownClass(f"class {name!r} not in database {db.classes}") from None
