import math

import numpy as np
import pytest

from binpick import pipeline
from binpick.convex import gjk_distance, obb_support
from binpick.errors import BadThresholds, EmptyScene, UnknownTarget
from binpick.forest import ConstantModel
from binpick.fusion import PoseEstimate
from binpick.geometry import BinBox, DEFAULT_CATALOG, RigidTransform, random_rotation, signed_distance
from binpick.occupancy import FREE, OCCLUDED, OccupancyGrid
from binpick.pipeline import (EpisodeRecord, GraspCandidate, GraspDatabase, GraspEntry, PipelineConfig, body_boxes,
                              compute_metrics, default_database, expand_candidates, filter_reachable,
                              load_records, metrics_from_counts, oracle_execute, quantile_thresholds, run_episode,
                              run_trial, save_records, score_candidates, split_by_quality)
from binpick.plyio import PointCloud
from binpick.scene import Scene, SceneConfig, SceneObject, assign_traversability, generate_scene, resting_pose
from binpick.sensing import ReachabilityModel

CYL = DEFAULT_CATALOG["cylinder"]
DOWN = np.diag([1.0, -1.0, -1.0])  # grasp frame with z pointing down


def _scene(placements):
    objs = [SceneObject(i, "cylinder", resting_pose(CYL, "side", x, y, yaw)) for i, (x, y, yaw) in enumerate(placements)]
    return assign_traversability(Scene(BinBox(), tuple(objs)))


def _vertical_grasp(obj, db=default_database("cylinder")):
    """Straight-down centred grasp on a true object pose."""
    i = max(range(len(db)), key=lambda k: (-round(np.linalg.norm(db.entries[k].pose.translation[[0, 1]]), 9),
                                            -(obj.pose.rotation @ db.entries[k].pose.rotation)[2, 2]))
    est = PoseEstimate("cylinder", obj.pose, 0.0)
    return expand_candidates(GraspDatabase("cylinder", [db.entries[i]]), [est])[0]


def _candidate(R, t, width=0.03, quality=1.0):
    return GraspCandidate(RigidTransform.from_rt(R, t), width, quality, 0, 0, "cylinder", RigidTransform.identity())


# -- candidates -------------------------------------------------------------

def test_expand_identity_pose_equals_entry():
    e = GraspEntry(RigidTransform.from_rt(random_rotation(np.random.default_rng(1)), [0.01, 0.02, 0.03]), 0.03, 0.7)
    c = expand_candidates(GraspDatabase("cylinder", [e]), [PoseEstimate("cylinder", RigidTransform.identity(), 0.0)])
    assert len(c) == 1
    assert np.array_equal(c[0].pose.as_matrix(), e.pose.as_matrix())


def test_expand_count_and_matrix_oracle(rng):
    entries = [GraspEntry(RigidTransform.from_rt(random_rotation(rng), rng.normal(0, 0.02, 3)), 0.03, float(q))
               for q in rng.random(172)]
    ests = [PoseEstimate("cylinder", RigidTransform.from_rt(random_rotation(rng), rng.normal(0, 0.1, 3)), 0.0)
            for _ in range(9)]
    cands = expand_candidates(GraspDatabase("cylinder", entries), ests)
    assert len(cands) == 172 * 9
    for c in cands[::7]:
        M = ests[c.est_index].pose.as_matrix() @ entries[c.db_index].pose.as_matrix()
        assert np.allclose(c.pose.as_matrix(), M, atol=1e-12, rtol=0)


def test_split_single_subset():
    cands = [_candidate(DOWN, [0, 0, 0.05], quality=q) for q in (0.1, 0.5, 0.9)]
    (only,) = split_by_quality(cands, [])
    assert only == cands


def test_quantile_split_sizes(rng):
    for n in (9, 10, 11, 180):
        cands = [_candidate(DOWN, [0, 0, 0.05], quality=q) for q in rng.permutation(n) / n]
        thr = quantile_thresholds([c.quality for c in cands], 3)
        subsets = split_by_quality(cands, thr)
        assert all(abs(len(s) - n / 3) <= 1 for s in subsets)
        assert sorted(id(c) for s in subsets for c in s) == sorted(id(c) for c in cands)
        assert min(c.quality for c in subsets[0]) > max(c.quality for c in subsets[1])


def test_bad_thresholds():
    with pytest.raises(BadThresholds):
        split_by_quality([], [0.3, 0.5])
    with pytest.raises(BadThresholds):
        split_by_quality([], [0.5, 0.5])


# -- reachability -------------------------------------------------------------

def test_centred_vertical_grasp_kept():
    assert len(filter_reachable([_candidate(DOWN, [0, 0, 0.03])], ReachabilityModel(), BinBox())) == 1


def test_grasp_below_bottom_removed():
    up = np.diag([1.0, 1.0, 1.0])
    cands = [_candidate(DOWN, [0, 0, -0.05]), _candidate(up, [0, 0, 0.03])]
    assert filter_reachable(cands, ReachabilityModel(), BinBox()) == []


def _clearance(cand, bin_box, gripper=pipeline.GripperModel()):
    """Smallest GJK distance between the hand bodies and any bin part."""
    boxes = body_boxes(gripper, 0.0)
    best = np.inf
    for b in boxes:
        c = cand.pose.apply((b[0] + b[1]) / 2)
        sa = obb_support(c, cand.pose.rotation, (b[1] - b[0]) / 2)
        for shape, pose in bin_box.parts():
            sb = obb_support(pose.translation, pose.rotation, shape.half)
            best = min(best, gjk_distance(sa, sb))
    return best


def test_wall_brushing_by_less_than_margin():
    half_palm = pipeline.PALM[0] / 2
    near = _candidate(DOWN, [-0.15 + half_palm + 0.001, 0, 0.005])
    far = _candidate(DOWN, [-0.15 + half_palm + 0.003, 0, 0.005])
    assert _clearance(near, BinBox()) == pytest.approx(0.001, abs=1e-9)
    assert filter_reachable([near, far], ReachabilityModel(), BinBox(), margin=0.002) == [far]


def test_wall_clearance_matches_gjk(rng):
    bin_box = BinBox()
    checked = 0
    for _ in range(300):
        yaw = rng.uniform(0, 2 * np.pi)
        Rz = np.array([[math.cos(yaw), -math.sin(yaw), 0], [math.sin(yaw), math.cos(yaw), 0], [0, 0, 1]])
        c = _candidate(Rz @ DOWN, [rng.uniform(-0.15, 0.15), rng.uniform(-0.12, 0.12), rng.uniform(0.0, 0.05)])
        d = _clearance(c, bin_box)
        if abs(d - 0.002) < 1e-6:
            continue
        kept = bool(filter_reachable([c], ReachabilityModel(), bin_box, margin=0.002))
        assert kept == (d > 0.002)
        checked += 1
    assert checked > 250


# -- scoring ---------------------------------------------------------------------

def _score_fixture():
    sc = _scene([(0.0, 0.0, 0.0)])
    cand = _vertical_grasp(sc.objects[0])
    est = PoseEstimate("cylinder", sc.objects[0].pose, 0.0)
    grid = OccupancyGrid.for_bin(sc.bin, 0.01)
    grid.cells[:] = FREE
    centers = grid.centers_world().reshape(-1, 3)
    sv = pipeline.build_swept_volume(cand, pipeline.GripperModel(), 0.002)
    inside = sv.contains(centers) & (signed_distance(CYL, est.pose, centers) > 0)
    return cand, est, grid, np.flatnonzero(inside)


def _score(cand, est, grid, alpha):
    c = GraspCandidate(cand.pose, cand.width, cand.quality, 0, 0, "cylinder", est.pose)
    return score_candidates([c], ConstantModel(0.7), PointCloud(np.zeros((0, 3))), grid, [est], alpha)[0]


def test_penalty_exact_difference():
    cand, est, grid, inside = _score_fixture()
    assert len(inside) >= 5
    a = _score(cand, est, grid, 0.02)
    g5 = grid.copy()
    g5.cells.reshape(-1)[inside[:5]] = OCCLUDED
    b = _score(cand, est, g5, 0.02)
    assert a.n_blue == 0 and a.adjusted == a.score
    assert b.n_blue == 5
    assert a.adjusted - b.adjusted == pytest.approx(0.10, abs=1e-12)


def test_more_occlusion_strictly_lower():
    cand, est, grid, inside = _score_fixture()
    prev = np.inf
    g = grid.copy()
    for k in range(len(inside)):
        g.cells.reshape(-1)[inside[k]] = OCCLUDED
        s = _score(cand, est, g, 0.02)
        assert s.n_blue == k + 1 and s.adjusted < prev and s.adjusted <= s.score
        prev = s.adjusted


def test_occluded_cells_inside_target_do_not_count():
    cand, est, grid, _ = _score_fixture()
    g = grid.copy()
    centers = g.centers_world().reshape(-1, 3)
    g.cells.reshape(-1)[signed_distance(CYL, est.pose, centers) <= 0] = OCCLUDED
    assert _score(cand, est, g, 0.02).n_blue == 0


# -- oracle ----------------------------------------------------------------------

def _sweep_hits(scene, cand, target_id, rng, n=200_000):
    """Monte Carlo contact check: sample the swept boxes and test signed distance to each neighbour."""
    sv = pipeline.build_swept_volume(cand, pipeline.GripperModel(), 0.0)
    hits = set()
    for b in sv.boxes:
        local = rng.uniform(b[0], b[1], (n // 4, 3))
        pts = sv.frame.apply(local)
        for o in scene.objects:
            if o.id != target_id and (signed_distance(scene.shape_of(o), o.pose, pts) < 0).any():
                hits.add(o.id)
    return hits


def test_oracle_clear_grasp(rng):
    sc = _scene([(0.0, 0.0, 0.0), (0.0, 0.08, 0.0)])
    cand = _vertical_grasp(sc.objects[0])
    assert oracle_execute(sc, cand) == (True, False)
    assert _sweep_hits(sc, cand, 0, rng) == set()


def test_oracle_wedged_neighbour(rng):
    w, d, _ = BinBox().extents
    x0, y0 = -w / 2 + 0.04, -d / 2 + 0.015
    sc = _scene([(x0, y0, 0.0), (x0, y0 + 0.03, 0.0), (-w / 2 + 0.095, -d / 2 + 0.04, math.pi / 2)])
    assert not sc.get(0).traversable
    cand = _vertical_grasp(sc.objects[1])
    ok, contact, detail = oracle_execute(sc, cand, return_detail=True)
    assert (ok, contact) == (False, True) and 0 in detail["contacts"]
    assert 0 in _sweep_hits(sc, cand, 1, rng)


def test_oracle_traversable_neighbour(rng):
    sc = _scene([(0.0, 0.0, 0.0), (0.0, 0.03, 0.0)])
    assert sc.get(1).traversable
    cand = _vertical_grasp(sc.objects[0])
    assert oracle_execute(sc, cand) == (True, True)
    assert _sweep_hits(sc, cand, 0, rng) == {1}


def test_oracle_pose_error_and_unknown_target():
    sc = _scene([(0.0, 0.0, 0.0)])
    cand = _vertical_grasp(sc.objects[0])
    off = GraspCandidate(cand.pose, cand.width, cand.quality, 0, 0, "cylinder",
                         RigidTransform.from_rt(sc.objects[0].pose.rotation, sc.objects[0].pose.translation + [0.01, 0, 0]))
    assert oracle_execute(sc, off)[0] is False
    far = GraspCandidate(cand.pose, cand.width, cand.quality, 0, 0, "cylinder",
                         RigidTransform.from_rt(np.eye(3), [0.1, 0.1, 0.0]))
    with pytest.raises(UnknownTarget):
        oracle_execute(sc, far)
    assert oracle_execute(sc, cand) == oracle_execute(sc, cand)


# -- metrics and records ------------------------------------------------------

def test_table_counts():
    m = metrics_from_counts(40, 10, 1, 5)
    assert m.precision == pytest.approx(0.80, abs=1e-3)
    assert m.recall == pytest.approx(0.9756, abs=1e-3)
    assert m.f_value == pytest.approx(2 * 40 / (2 * 40 + 10 + 1), abs=1e-12)  # 0.8791
    m = metrics_from_counts(46, 4, 0, 1)
    assert (m.precision, m.recall) == (pytest.approx(0.92), 1.0)
    assert m.f_value == pytest.approx(0.9583, abs=1e-3)


def test_metrics_from_records():
    recs = [EpisodeRecord(i, predicted=p, success=s) for i, (p, s) in
            enumerate([(True, True)] * 3 + [(False, False)] + [(None, None)])]
    m = compute_metrics(recs)
    assert (m.precision, m.recall, m.f_value) == (1.0, 1.0, 1.0) and (m.tp, m.tn) == (3, 1)
    empty = metrics_from_counts(0, 0, 0, 4)
    assert empty.precision is None and empty.f_value is None


# -- trial loop --------------------------------------------------------------------

def test_isolated_object_accepted_first_view():
    sc = _scene([(0.0, 0.0, 0.0)])
    state = pipeline.EpisodeState(sc, 0)
    rec = run_trial(state, ConstantModel(0.9), PipelineConfig())
    assert rec.views == 1 and rec.predicted is True and rec.success is True
    assert len(state.scene.objects) == 0
    with pytest.raises(EmptyScene):
        run_trial(state, ConstantModel(0.9), PipelineConfig())


def test_funnel_and_quality_first(monkeypatch):
    seen = []
    real = pipeline.evaluate_view

    def spy(*a, **k):
        out = real(*a, **k)
        seen.append(out[2])
        return out

    monkeypatch.setattr(pipeline, "evaluate_view", spy)
    sc = generate_scene(SceneConfig(), 3)
    rec = run_trial(pipeline.EpisodeState(sc, 0), ConstantModel(0.9), PipelineConfig())
    f = rec.funnel
    assert f["expanded"] % len(default_database("cylinder")) == 0
    assert f["expanded"] > f["reachable"] >= f["accepted"]
    accepted = seen[-1]
    if accepted:
        assert rec.candidate["subset"] == min(c.subset for c in accepted)


def test_records_round_trip(tmp_path):
    sc = generate_scene(SceneConfig(count=3), 5)
    recs = run_episode(sc, ConstantModel(0.9), PipelineConfig(), seed=5, max_trials=2)
    save_records(tmp_path / "r.jsonl", recs)
    back = load_records(tmp_path / "r.jsonl")
    assert [r.to_json() for r in back] == [r.to_json() for r in recs]
    save_records(tmp_path / "s.jsonl", back)
    assert (tmp_path / "r.jsonl").read_text() == (tmp_path / "s.jsonl").read_text()
