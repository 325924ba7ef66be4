import math

import numpy as np
import pytest

from binpick.convex import shape_distance
from binpick.errors import PlacementFailed, UnknownId
from binpick.geometry import BinBox, RigidTransform, signed_distance, support
from binpick.scene import (Scene, SceneConfig, SceneObject, assign_traversability, footprint, footprint_distance,
                           generate_scene, load_scene, push_free, remove_object, resting_pose, save_scene)


def _scene_from(placements, bin_box=BinBox()):
    """placements: (shape_ref, orientation, x, y, yaw)."""
    s = Scene(bin_box, ())
    objs = []
    for i, (ref, orient, x, y, yaw) in enumerate(placements):
        objs.append(SceneObject(i, ref, resting_pose(s.catalog[ref], orient, x, y, yaw)))
    return assign_traversability(Scene(bin_box, tuple(objs)))


def _push_oracle(scene, obj_id, delta=0.015, directions=8, steps=4, tol=1e-9):
    """3-D GJK collision check against neighbours and the bin walls over the push fan."""
    me = scene.get(obj_id)
    shape = scene.shape_of(me)
    walls = scene.bin.parts()[1:]
    out = []
    for k in range(directions):
        a = 2 * math.pi * k / directions
        u = np.array([math.cos(a), math.sin(a), 0.0])
        ok = True
        for s in range(1, steps + 1):
            pose = RigidTransform(me.pose.rotation, me.pose.translation + u * delta * s / steps)
            for o in scene.objects:
                if o.id != obj_id and shape_distance(shape, pose, scene.shape_of(o), o.pose) <= 0:
                    if _penetration(shape, pose, scene.shape_of(o), o.pose) > tol:
                        ok = False
            for wshape, wpose in walls:
                if _penetration(shape, pose, wshape, wpose) > tol:
                    ok = False
        out.append(ok)
    return out


def _penetration(shape_a, pose_a, shape_b, pose_b, n=3000):
    pts = pose_a.apply(shape_a.sample_surface(n, np.random.default_rng(0)))
    return max(0.0, -float(signed_distance(shape_b, pose_b, pts).min()))


def test_single_object():
    sc = generate_scene(SceneConfig(count=1), 0)
    assert len(sc) == 1 and sc.objects[0].traversable


def test_determinism():
    a = generate_scene(SceneConfig(), 42)
    b = generate_scene(SceneConfig(), 42)
    assert a.identical_to(b)
    assert not a.identical_to(generate_scene(SceneConfig(), 43))


@pytest.mark.parametrize("parts", [("cylinder",), ("box",), ("cylinder", "box")])
def test_no_penetration_and_resting(parts):
    for seed in range(3):
        sc = generate_scene(SceneConfig(parts=parts), seed)
        assert len(sc) == 9
        rng = np.random.default_rng(seed)
        for o in sc.objects:
            shape = sc.shape_of(o)
            assert abs(support(shape, o.pose, [0, 0, -1])[2]) <= 1e-6
            pts = o.pose.apply(shape.sample_surface(4000, rng))
            assert np.all(sc.bin.inside_interior(pts, tol=1e-9))
            for other in sc.objects:
                if other.id != o.id:
                    sd = signed_distance(sc.shape_of(other), other.pose, pts)
                    assert sd.min() >= -1e-7


def test_gaps_are_tight():
    sc = generate_scene(SceneConfig(), 7)
    fps = sc.footprints()
    nearest = [min(footprint_distance(fps[i], fps[j]) for j in fps if j != i) for i in fps]
    assert max(nearest) <= SceneConfig().max_gap + 1e-6


def test_footprint_distance_matches_gjk():
    sc = generate_scene(SceneConfig(parts=("cylinder", "box")), 3)
    for a in sc.objects:
        for b in sc.objects:
            if a.id < b.id:
                d2 = footprint_distance(footprint(sc.shape_of(a), a.pose), footprint(sc.shape_of(b), b.pose))
                d3 = shape_distance(sc.shape_of(a), a.pose, sc.shape_of(b), b.pose)
                if d2 > 1e-9:
                    assert d3 == pytest.approx(d2, abs=1e-7)


def test_bin_too_small():
    with pytest.raises(PlacementFailed):
        generate_scene(SceneConfig(count=30, bin_extents=(0.1, 0.1, 0.08)), 0)


def test_wedged_in_corner_not_traversable():
    w, d, _ = BinBox().extents
    x0, y0 = -w / 2 + 0.04, -d / 2 + 0.015
    sc = _scene_from([("cylinder", "side", x0, y0, 0.0),
                      ("cylinder", "side", x0, y0 + 0.03, 0.0),
                      ("cylinder", "side", -w / 2 + 0.095, -d / 2 + 0.04, math.pi / 2)])
    assert push_free(sc, 0) == _push_oracle(sc, 0)
    assert not sc.get(0).traversable


def test_one_neighbour_open_far_side():
    sc = _scene_from([("cylinder", "side", 0.0, 0.0, 0.0), ("cylinder", "side", 0.0, 0.03, 0.0)])
    flags = push_free(sc, 0)
    assert flags == _push_oracle(sc, 0)
    assert sc.get(0).traversable and sc.get(1).traversable
    assert not flags[2] and flags[6]  # +y blocked, -y free


def test_push_fan_matches_oracle_on_random_scene():
    sc = generate_scene(SceneConfig(), 11)
    for o in sc.objects[:4]:
        assert push_free(sc, o.id) == _push_oracle(sc, o.id)


def test_remove_object():
    sc = generate_scene(SceneConfig(), 5)
    r = remove_object(sc, 3)
    assert len(r) == 8 and r.ids == [i for i in sc.ids if i != 3]
    with pytest.raises(UnknownId):
        r.get(3)
    with pytest.raises(UnknownId):
        remove_object(r, 3)
    one = generate_scene(SceneConfig(count=1), 0)
    assert len(remove_object(one, one.objects[0].id)) == 0


def test_scene_json_round_trip(tmp_path):
    sc = generate_scene(SceneConfig(parts=("cylinder", "box")), 9)
    save_scene(tmp_path / "s.json", sc)
    back = load_scene(tmp_path / "s.json")
    assert back.identical_to(sc)
    save_scene(tmp_path / "s2.json", back)
    assert (tmp_path / "s.json").read_text() == (tmp_path / "s2.json").read_text()
