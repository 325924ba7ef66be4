import itertools
import math

import numpy as np
import pytest

from binpick.errors import NoCandidate
from binpick.features import GripperModel, build_swept_volume
from binpick.geometry import BinBox, RigidTransform, rot_z
from binpick.occupancy import (FREE, OCCLUDED, OCCUPIED, UNKNOWN, OccupancyGrid, blocked_from, build_grid,
                               classify_occluded, hidden_bottom_counts, load_grid_csv, mark_occluded, mark_occupied,
                               save_grid_csv, select_view_first, select_view_next, view_scores)
from binpick.plyio import PointCloud
from binpick.scene import Scene, SceneConfig, generate_scene
from binpick.sensing import SensorModel, SensorPose, candidate_poses, capture, look_at, strip_bin_points

from oracles import visible_by_sampling


def _pose(pos, face=0, standoff=0.5):
    return SensorPose(look_at(pos, [0, 0, 0]), face, standoff)


def test_grid_covers_bin():
    g = OccupancyGrid.for_bin(BinBox(), 0.01)
    assert g.dims == (30, 24, 8)
    assert np.allclose(g.origin, [-0.15, -0.12, 0.0])
    assert g.count(UNKNOWN) == 30 * 24 * 8


def test_mark_occupied_basics():
    g = OccupancyGrid.for_bin(BinBox(), 0.01)
    assert mark_occupied(g, PointCloud.empty()).count(OCCUPIED) == 0
    c = g.centers()[3, 4, 5]
    one = mark_occupied(g, PointCloud(c[None]))
    assert one.count(OCCUPIED) == 1 and one.cells[3, 4, 5] == OCCUPIED
    assert g.count(OCCUPIED) == 0  # input untouched


def test_dense_plane_cell_count():
    g = OccupancyGrid.for_bin(BinBox(), 0.01)
    xs, ys = np.meshgrid(np.linspace(-0.05 + 1e-4, 0.05 - 1e-4, 200), np.linspace(-0.03 + 1e-4, 0.03 - 1e-4, 120))
    pts = np.column_stack([xs.ravel(), ys.ravel(), np.full(xs.size, 0.0351)])
    n = mark_occupied(g, PointCloud(pts)).count(OCCUPIED)
    expected = (0.10 * 0.06) / (0.01 * 0.01)
    assert abs(n - expected) <= 10 + 6  # within one row either way


def test_empty_scene_top_view_all_free():
    g = OccupancyGrid.for_bin(BinBox(), 0.01)
    out = mark_occluded(g, _pose([0, 0, 0.5]), sensor=SensorModel())
    assert out.count(FREE) == g.cells.size


def test_box_shadow_volume():
    g = OccupancyGrid.for_bin(BinBox(), 0.01)
    g.cells[10:14, 10:14, 5] = OCCUPIED
    far_above = _pose([0.0, 0.0, 1000.0])
    c = g.centers()[10:14, 10:14, 5].mean(axis=(0, 1))
    far_above = SensorPose(look_at([c[0], c[1], 1000.0], [c[0], c[1], 0.0]), 0, 1000.0)
    out = mark_occluded(g, far_above)
    expected = np.zeros(g.dims, bool)
    expected[10:14, 10:14, :5] = True
    assert np.array_equal(out.cells == OCCLUDED, expected)


def test_oblique_wall_shadow_matches_oracle():
    g = OccupancyGrid.for_bin(BinBox(), 0.01)
    pos = np.array([0.5013, 0.0117, 0.1031])
    out = mark_occluded(g, _pose(pos))
    starts = g.centers().reshape(-1, 3)
    vis = visible_by_sampling(np.zeros(g.dims, bool), g.origin, g.cell, starts, pos)
    assert np.array_equal(out.cells.reshape(-1) == FREE, vis)
    # the far (-x) floor corner is behind the +x wall
    assert out.cells[0, 12, 0] == OCCLUDED


def test_blocked_matches_oracle_random_grid(rng):
    g = OccupancyGrid([0, 0, 0], 0.01, (12, 10, 6))
    occ = rng.random(g.dims) < 0.12
    starts = g.centers().reshape(-1, 3)[~occ.reshape(-1)]
    for _ in range(4):
        target = np.array([rng.uniform(-0.2, 0.3), rng.uniform(-0.2, 0.3), rng.uniform(0.1, 0.4)])
        b = blocked_from(g, target, occ, starts)
        assert np.array_equal(~b, visible_by_sampling(occ, g.origin, g.cell, starts, target))


def test_transitions_monotone_and_free_sticks():
    sc = generate_scene(SceneConfig(), 1)
    cands = candidate_poses(sc.bin)
    a = capture(sc, SensorModel(width=100, height=100), cands[0])
    g1 = build_grid(sc.bin, strip_bin_points(a, sc.bin), [cands[0]])
    g2 = build_grid(sc.bin, strip_bin_points(a, sc.bin), [cands[0], cands[5]])
    assert g1.count(UNKNOWN) == 0
    assert not np.any((g1.cells == FREE) & (g2.cells != FREE))
    assert g2.count(OCCLUDED) <= g1.count(OCCLUDED)
    assert not np.any((g1.cells == OCCUPIED) & (g1.cells == OCCLUDED))


def test_select_view_first():
    b = BinBox()
    g = OccupancyGrid.for_bin(b, 0.01)
    cands = candidate_poses(b, 6, (0.5,))
    assert select_view_first(g, cands).face_index == 0
    assert select_view_first(g, cands[3:4]) is cands[3]
    with pytest.raises(NoCandidate):
        select_view_first(g, [])


def test_select_view_first_oblique_only_matches_oracle():
    b = BinBox()
    g = OccupancyGrid.for_bin(b, 0.01)
    cands = [c for c in candidate_poses(b, 20, (0.45, 0.6)) if c.face_index > 0][:8]
    starts = g.centers()[:, :, 0, :].reshape(-1, 3)
    empty = np.zeros(g.dims, bool)
    hidden = [int((~visible_by_sampling(empty, g.origin, g.cell, starts, c.position)).sum()) for c in cands]
    assert list(hidden_bottom_counts(g, cands)) == hidden
    best = min(range(len(cands)), key=lambda i: (hidden[i], cands[i].face_index, cands[i].standoff))
    assert select_view_first(g, cands) is cands[best]


def test_select_view_next_finds_pocket_side():
    b = BinBox()
    # origin nudged off the symmetric lattice so no ray runs exactly along a cell edge
    g = OccupancyGrid([-0.1487, -0.1171, 0.0003], 0.01, (30, 24, 8))
    g.cells[:] = FREE
    g.cells[14:19, 10:14, 2:4] = OCCUPIED  # overhang
    g.cells[14:16, 10:14, :2] = OCCUPIED
    g.cells[16:19, 10:14, :2] = OCCLUDED  # pocket beneath it, open toward +x
    cands = candidate_poses(b, 20, (0.45, 0.6))
    best, score = select_view_next(g, cands, return_score=True)
    assert score > 0 and best.position[0] > 0
    starts = g.centers().reshape(-1, 3)[g.cells.reshape(-1) == OCCLUDED]
    oracle = [int(visible_by_sampling(g.cells == OCCUPIED, g.origin, g.cell, starts, c.position).sum()) for c in cands]
    assert score == max(oracle)
    assert list(view_scores(g, cands)) == oracle


def test_select_view_next_no_occlusion_tie_break():
    b = BinBox()
    g = OccupancyGrid.for_bin(b, 0.01)
    g.cells[:] = FREE
    cands = candidate_poses(b, 20, (0.45, 0.6))[::-1]
    best = select_view_next(g, cands)
    assert best.face_index == 0 and best.standoff == 0.45


def test_repeat_pose_never_strictly_best():
    sc = generate_scene(SceneConfig(), 2)
    cands = candidate_poses(sc.bin)
    first = cands[0]
    cloud = strip_bin_points(capture(sc, SensorModel(width=100, height=100), first), sc.bin)
    g = build_grid(sc.bin, cloud, [first])
    scores = view_scores(g, cands)
    assert scores[0] <= scores.max()
    assert scores[0] == 0  # everything it could see is already free


def _lattice_count(lo, hi, origin, cell, dims):
    n = 1
    for a in range(3):
        centers = origin[a] + (np.arange(dims[a]) + 0.5) * cell
        n *= int(np.sum((centers >= lo[a]) & (centers <= hi[a])))
    return n


def test_classify_slab_analytic():
    g = OccupancyGrid([-0.1, -0.1, -0.15], 0.01, (20, 20, 25))
    g.cells[:] = OCCLUDED
    sv = build_swept_volume(RigidTransform(np.eye(3), [0.0013, -0.0021, 0.0017]), GripperModel(), width=0.03)
    boxes = sv.boxes + sv.frame.translation
    expected = 0
    for k in range(1, 5):
        for sub in itertools.combinations(range(4), k):
            lo = boxes[list(sub), 0].max(axis=0)
            hi = boxes[list(sub), 1].min(axis=0)
            if np.all(hi >= lo):
                expected += (-1) ** (k + 1) * _lattice_count(lo, hi, g.origin, g.cell, g.dims)
    blue, green = classify_occluded(g, sv)
    assert blue == expected and blue + green == g.cells.size


def test_classify_trivial():
    g = OccupancyGrid.for_bin(BinBox(), 0.01)
    sv = build_swept_volume(RigidTransform(rot_z(0.3), [0, 0, 0.05]), GripperModel(), width=0.03)
    assert classify_occluded(g, sv) == (0, 0)
    g.cells[0:3, 0:3, 0:2] = OCCLUDED
    assert classify_occluded(g, sv) == (0, 18)


def test_grid_csv_round_trip(tmp_path):
    g = OccupancyGrid.for_bin(BinBox(), 0.02)
    rng = np.random.default_rng(0)
    g.cells[:] = rng.integers(0, 4, g.dims)
    save_grid_csv(tmp_path / "g.csv", g)
    back = load_grid_csv(tmp_path / "g.csv")
    assert np.array_equal(back.cells, g.cells) and back.dims == g.dims and back.cell == g.cell
    save_grid_csv(tmp_path / "g2.csv", back)
    assert (tmp_path / "g.csv").read_text() == (tmp_path / "g2.csv").read_text()
    assert (tmp_path / "g.csv").read_text().splitlines()[1] == "ix,iy,iz,state"
