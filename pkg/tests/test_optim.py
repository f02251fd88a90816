import numpy as np
import pytest

from shapescene.errors import MismatchedLengths
from shapescene.geom import Pose9DoF, apply_pose, geodesic_distance
from shapescene.metrics import miv_and_collisions
from shapescene.optim import OptimConfig, fit_poses, resolve_collisions, scene_to_objects
from shapescene.scene import (
    PlacedObject,
    Scene,
    class_id,
    generate_scene,
    perturb_pose,
    scene_to_json,
)


def _targets(db, scene):
    return [
        apply_pose(o.pose, db.entry(class_id(db, o.class_name), o.exemplar).points)
        for o in scene.objects
    ]


def _perturbed(scene, rot_deg, trans, scale, seed):
    objects = tuple(
        PlacedObject(o.class_name, o.exemplar,
                     perturb_pose(o.pose, rot_deg, trans, scale, seed=seed + k))
        for k, o in enumerate(scene.objects)
    )
    return Scene(scene.seed, objects)


def test_optim_config_validates():
    with pytest.raises(ValueError):
        OptimConfig(lr=0.0)
    with pytest.raises(ValueError):
        OptimConfig(iterations=0)


def test_fit_poses_ground_truth_init(toy_db):
    gt = generate_scene(toy_db, 2, seed=21)
    recovered, trace = fit_poses(toy_db, gt, _targets(toy_db, gt),
                                 OptimConfig(iterations=100))
    assert trace[0] < 1e-20
    assert len(trace) == 1  # converged at iteration 0
    assert scene_to_json(recovered) == scene_to_json(gt)


def test_fit_poses_recovers_perturbation(toy_db):
    gt = generate_scene(toy_db, 1, seed=31)
    init = _perturbed(gt, 10.0, 0.1, 0.1, seed=100)
    recovered, trace = fit_poses(toy_db, init, _targets(toy_db, gt),
                                 OptimConfig(lr=1e-2, iterations=500))
    o, r = gt.objects[0], recovered.objects[0]
    assert geodesic_distance(o.pose.r, r.pose.r) < 1e-3
    assert np.linalg.norm(o.pose.t - r.pose.t) < 1e-3
    assert np.max(np.abs(o.pose.s - r.pose.s)) < 1e-3


def test_fit_poses_trace_monotone(toy_db):
    gt = generate_scene(toy_db, 1, seed=32)
    init = _perturbed(gt, 10.0, 0.1, 0.1, seed=200)
    _, trace = fit_poses(toy_db, init, _targets(toy_db, gt),
                         OptimConfig(lr=1e-2, iterations=300))
    tr = np.array(trace)
    assert np.all(np.diff(tr[10:]) <= 1e-9)


def test_fit_poses_deterministic(toy_db):
    gt = generate_scene(toy_db, 2, seed=33)
    init = _perturbed(gt, 8.0, 0.05, 0.05, seed=300)
    cfg = OptimConfig(lr=1e-2, iterations=100)
    a, trace_a = fit_poses(toy_db, init, _targets(toy_db, gt), cfg)
    b, trace_b = fit_poses(toy_db, init, _targets(toy_db, gt), cfg)
    assert trace_a == trace_b
    assert scene_to_json(a) == scene_to_json(b)


def test_fit_poses_freeze_blocks(toy_db):
    gt = generate_scene(toy_db, 1, seed=34)
    init = _perturbed(gt, 8.0, 0.05, 0.05, seed=400)
    recovered, _ = fit_poses(toy_db, init, _targets(toy_db, gt),
                             OptimConfig(lr=1e-2, iterations=50),
                             freeze=frozenset({"rot", "scale"}))
    o, r = init.objects[0], recovered.objects[0]
    # The frozen raw matrix still passes through the final projection.
    assert np.allclose(r.pose.r.m, o.pose.r.m, atol=1e-12)
    assert np.array_equal(r.pose.s, o.pose.s)
    assert not np.array_equal(r.pose.t, o.pose.t)
    with pytest.raises(ValueError):
        fit_poses(toy_db, init, _targets(toy_db, gt), OptimConfig(),
                  freeze=frozenset({"bogus"}))


def test_fit_poses_mismatched_targets(toy_db):
    gt = generate_scene(toy_db, 2, seed=35)
    with pytest.raises(MismatchedLengths):
        fit_poses(toy_db, gt, _targets(toy_db, gt)[:1], OptimConfig())


def test_resolve_collision_free_unchanged(toy_db):
    scene = generate_scene(toy_db, 2, seed=41)
    resolved, trace = resolve_collisions(toy_db, scene, OptimConfig(iterations=20))
    assert trace[0] == (0.0, 0.0, 0.0)
    assert scene_to_json(resolved) == scene_to_json(scene)


def test_resolve_lowers_collision_loss(toy_db):
    base = generate_scene(toy_db, 2, seed=42)
    a, b = base.objects
    overlap = Scene(base.seed, (
        a,
        PlacedObject(b.class_name, b.exemplar,
                     Pose9DoF(b.pose.r, a.pose.t + np.array([0.1, 0.05, 0.0]),
                              b.pose.s)),
    ))
    from shapescene.collision import collision_loss_total
    before = collision_loss_total(scene_to_objects(toy_db, overlap))
    assert before > 0.0
    resolved, _ = resolve_collisions(
        toy_db, overlap, OptimConfig(lr=2e-2, iterations=200),
        anchor_term_weight=1e-3)
    after = collision_loss_total(scene_to_objects(toy_db, resolved))
    assert after < before


def test_resolve_moves_translations_only(toy_db):
    base = generate_scene(toy_db, 2, seed=43)
    a, b = base.objects
    overlap = Scene(base.seed, (
        a,
        PlacedObject(b.class_name, b.exemplar,
                     Pose9DoF(b.pose.r, a.pose.t + np.array([0.1, 0.0, 0.0]),
                              b.pose.s)),
    ))
    resolved, _ = resolve_collisions(toy_db, overlap,
                                     OptimConfig(lr=2e-2, iterations=100),
                                     anchor_term_weight=1e-3)
    for orig, res in zip(overlap.objects, resolved.objects):
        assert np.array_equal(res.pose.r.m, orig.pose.r.m)
        assert np.array_equal(res.pose.s, orig.pose.s)


def test_resolve_warmup_freezes_collision_term(toy_db):
    base = generate_scene(toy_db, 2, seed=44)
    a, b = base.objects
    overlap = Scene(base.seed, (
        a,
        PlacedObject(b.class_name, b.exemplar,
                     Pose9DoF(b.pose.r, a.pose.t + np.array([0.1, 0.0, 0.0]),
                              b.pose.s)),
    ))
    resolved, trace = resolve_collisions(
        toy_db, overlap, OptimConfig(lr=2e-2, iterations=10, warmup=10),
        anchor_term_weight=1e-3)
    # With the collision weight zeroed throughout, nothing should move.
    assert scene_to_json(resolved) == scene_to_json(overlap)
    assert all(row[0] == trace[0][0] for row in trace)


def test_resolve_collision_count_not_increased(toy_db):
    scene = generate_scene(toy_db, 3, seed=45)
    _, count_before = miv_and_collisions(scene, toy_db)
    resolved, _ = resolve_collisions(toy_db, scene,
                                     OptimConfig(lr=2e-2, iterations=50),
                                     anchor_term_weight=1e-3)
    _, count_after = miv_and_collisions(resolved, toy_db)
    assert count_after <= count_before
