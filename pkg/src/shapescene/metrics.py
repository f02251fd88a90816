"""Evaluation metrics: voxel-grid scene IoU (absolute/relative), Procrustes
alignment, oriented-box IoU, 3D mAP, and intersecting-volume statistics.

Voxel metrics rasterize posed meshes onto a shared world grid; oriented-box
IoU rasterizes the two boxes' union bounding box (documented tolerance 0.01).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfiguration, EmptyScenes
from .geom import Pose9DoF, apply_pose, inverse_apply_pose
from .mesh import voxelize_occupancy
from .scene import PlacedObject, Scene, class_id, scene_grid
from .shapedb import ShapeDatabase, assign_exemplar

BOX_IOU_RESOLUTION = 64


@dataclass
class IoUReport:
    per_class: dict[str, float]
    mean: float
    global_iou: float
    relative_per_class: dict[str, float] | None = None
    relative_mean: float | None = None
    relative_global: float | None = None


@dataclass
class DetectionBox:
    class_name: str
    pose: Pose9DoF           # unit cube under this pose
    score: float = 1.0


def _scene_bounds(scenes: list[Scene], db: ShapeDatabase, pad: float = 0.1):
    los, his = [], []
    for scene in scenes:
        for o in scene.objects:
            mesh = db.entry(class_id(db, o.class_name), o.exemplar).mesh
            verts = apply_pose(o.pose, mesh.vertices)
            los.append(verts.min(axis=0))
            his.append(verts.max(axis=0))
    if not los:
        raise EmptyScenes("no objects in any scene")
    lo = np.min(los, axis=0) - pad
    hi = np.max(his, axis=0) + pad
    return tuple((float(a), float(b)) for a, b in zip(lo, hi))


def scene_class_occupancy(
    scene: Scene, db: ShapeDatabase, origin, dims, spacing
) -> dict[str, np.ndarray]:
    """Per-class union occupancy grids for all objects of a scene."""
    grids: dict[str, np.ndarray] = {}
    for o in scene.objects:
        mesh = db.entry(class_id(db, o.class_name), o.exemplar).mesh
        occ = voxelize_occupancy(mesh, o.pose, origin, dims, spacing)
        if o.class_name in grids:
            grids[o.class_name] |= occ
        else:
            grids[o.class_name] = occ
    return grids


def voxel_scene_iou(
    pred: Scene,
    gt: Scene,
    db: ShapeDatabase,
    resolution: int = 128,
    bounds=None,
) -> IoUReport:
    """Per-class and class-agnostic voxel IoU on a shared world grid.

    Classes absent from both scenes are excluded from the mean; classes
    present on one side only contribute 0.
    """
    if bounds is None:
        bounds = _scene_bounds([pred, gt], db)
    origin, dims, spacing = scene_grid(bounds, resolution)
    occ_p = scene_class_occupancy(pred, db, origin, dims, spacing)
    occ_g = scene_class_occupancy(gt, db, origin, dims, spacing)
    if not occ_p and not occ_g:
        raise EmptyScenes("both scenes rasterize empty")

    per_class: dict[str, float] = {}
    for cls in sorted(set(occ_p) | set(occ_g)):
        a = occ_p.get(cls)
        b = occ_g.get(cls)
        if a is None or b is None:
            per_class[cls] = 0.0
            continue
        union = np.count_nonzero(a | b)
        per_class[cls] = np.count_nonzero(a & b) / union if union else 0.0

    any_p = np.zeros(dims, dtype=bool)
    any_g = np.zeros(dims, dtype=bool)
    for g in occ_p.values():
        any_p |= g
    for g in occ_g.values():
        any_g |= g
    union = np.count_nonzero(any_p | any_g)
    global_iou = np.count_nonzero(any_p & any_g) / union if union else 0.0
    mean = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return IoUReport(per_class, mean, float(global_iou))


def oracle_scene(gt: Scene, db: ShapeDatabase) -> Scene:
    """Ground-truth poses with each object's database-nearest exemplar shape."""
    objects = []
    for o in gt.objects:
        cid = class_id(db, o.class_name)
        entry = db.entry(cid, o.exemplar)
        nearest = assign_exemplar(db, entry.sdf, cid)
        objects.append(PlacedObject(o.class_name, nearest, o.pose))
    return Scene(gt.seed, tuple(objects))


def relative_iou(
    pred: Scene,
    gt: Scene,
    db: ShapeDatabase,
    resolution: int = 128,
    bounds=None,
) -> IoUReport:
    """Absolute IoU divided by the oracle-reconstruction IoU, clamped to [0,1].

    Classes whose oracle IoU is zero are reported as undefined (omitted) and
    excluded from the relative mean.
    """
    if bounds is None:
        bounds = _scene_bounds([pred, gt], db)
    absolute = voxel_scene_iou(pred, gt, db, resolution, bounds)
    oracle = voxel_scene_iou(oracle_scene(gt, db), gt, db, resolution, bounds)

    rel: dict[str, float] = {}
    for cls, a in absolute.per_class.items():
        o = oracle.per_class.get(cls, 0.0)
        if o > 0.0:
            rel[cls] = min(a / o, 1.0)
    absolute.relative_per_class = rel
    absolute.relative_mean = float(np.mean(list(rel.values()))) if rel else 0.0
    absolute.relative_global = (
        min(absolute.global_iou / oracle.global_iou, 1.0)
        if oracle.global_iou > 0.0 else 0.0
    )
    return absolute


def procrustes_align(
    pred_points: np.ndarray, gt_points: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Closed-form similarity (scale c, rotation R, translation t) minimizing
    sum |c R p + t - g|^2 over corresponding points."""
    p = np.asarray(pred_points, dtype=np.float64)
    g = np.asarray(gt_points, dtype=np.float64)
    if p.shape != g.shape or len(p) < 3:
        raise DegenerateConfiguration("need >= 3 corresponding points")
    mu_p = p.mean(axis=0)
    mu_g = g.mean(axis=0)
    pc = p - mu_p
    gc = g - mu_g
    cov = gc.T @ pc / len(p)
    u, sv, vt = np.linalg.svd(cov)
    if np.sum(sv > 1e-12 * max(sv[0], 1e-300)) < 2:
        raise DegenerateConfiguration("point covariance has rank < 2")
    d = np.sign(np.linalg.det(u @ vt))
    s_mat = np.diag([1.0, 1.0, d])
    r = u @ s_mat @ vt
    var_p = np.mean(np.sum(pc**2, axis=1))
    c = float(np.trace(np.diag(sv) @ s_mat) / var_p)
    t = mu_g - c * (r @ mu_p)
    return c, r, t


def oriented_box_iou(a: Pose9DoF, b: Pose9DoF, resolution: int = BOX_IOU_RESOLUTION) -> float:
    """Voxelized IoU of two unit cubes under 9-DoF poses (tolerance ~0.01)."""
    corners = np.array([[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5)
                        for z in (-0.5, 0.5)])
    pts = np.vstack([apply_pose(a, corners), apply_pose(b, corners)])
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    bounds = tuple((float(l), float(h)) for l, h in zip(lo, hi))
    origin, dims, spacing = scene_grid(bounds, resolution)
    axes = [origin[k] + spacing * np.arange(dims[k]) for k in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    in_a = np.all(np.abs(inverse_apply_pose(a, centers)) <= 0.5, axis=1)
    in_b = np.all(np.abs(inverse_apply_pose(b, centers)) <= 0.5, axis=1)
    union = np.count_nonzero(in_a | in_b)
    return np.count_nonzero(in_a & in_b) / union if union else 0.0


def average_precision(matches: list[tuple[float, bool]], n_gt: int) -> float:
    """All-point interpolated AP from (score, is_true_positive) pairs."""
    if n_gt == 0:
        return 0.0
    if not matches:
        return 0.0
    matches = sorted(matches, key=lambda m: -m[0])
    tp = np.cumsum([1 if m[1] else 0 for m in matches])
    fp = np.cumsum([0 if m[1] else 1 for m in matches])
    recall = tp / n_gt
    precision = tp / (tp + fp)
    # Monotone precision envelope, integrated over recall steps.
    ap = 0.0
    prev_r = 0.0
    for i in range(len(matches)):
        p_max = precision[i:].max()
        if recall[i] > prev_r:
            ap += (recall[i] - prev_r) * p_max
            prev_r = recall[i]
    return float(ap)


def map3d(
    preds: list[DetectionBox],
    gts: list[DetectionBox],
    iou_threshold: float,
    box_resolution: int = BOX_IOU_RESOLUTION,
) -> tuple[dict[str, float], float]:
    """Greedy score-ordered matching, per-class AP, and the mean over classes
    with at least one ground truth."""
    classes = sorted({g.class_name for g in gts})
    per_class: dict[str, float] = {}
    for cls in classes:
        cls_gts = [g for g in gts if g.class_name == cls]
        cls_preds = sorted(
            (p for p in preds if p.class_name == cls), key=lambda p: -p.score
        )
        matched = [False] * len(cls_gts)
        outcomes: list[tuple[float, bool]] = []
        for p in cls_preds:
            best_iou = 0.0
            best_j = -1
            for j, g in enumerate(cls_gts):
                if matched[j]:
                    continue
                iou = oriented_box_iou(p.pose, g.pose, box_resolution)
                if iou > best_iou:
                    best_iou = iou
                    best_j = j
            if best_j >= 0 and best_iou >= iou_threshold:
                matched[best_j] = True
                outcomes.append((p.score, True))
            else:
                outcomes.append((p.score, False))
        per_class[cls] = average_precision(outcomes, len(cls_gts))
    mean = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return per_class, mean


def miv_and_collisions(
    scene: Scene,
    db: ShapeDatabase,
    resolution: int = 64,
    epsilon_voxels: int = 1,
    bounds=None,
) -> tuple[float, int]:
    """Mean intersecting volume over colliding object pairs, and their count.

    A pair collides when its voxel overlap exceeds epsilon_voxels; the volume
    is overlap count times voxel volume (world units cubed).
    """
    if bounds is None:
        bounds = _scene_bounds([scene], db)
    origin, dims, spacing = scene_grid(bounds, resolution)
    occs = []
    for o in scene.objects:
        mesh = db.entry(class_id(db, o.class_name), o.exemplar).mesh
        occs.append(voxelize_occupancy(mesh, o.pose, origin, dims, spacing))
    voxel_volume = spacing**3
    volumes = []
    for i in range(len(occs)):
        for j in range(i + 1, len(occs)):
            overlap = int(np.count_nonzero(occs[i] & occs[j]))
            if overlap > epsilon_voxels:
                volumes.append(overlap * voxel_volume)
    if not volumes:
        return 0.0, 0
    return float(np.mean(volumes)), len(volumes)
