"""Tri-state voxel grid over the bin interior, view planning and occlusion counts.

Cells are addressed (ix, iy, iz) in the bin frame with ``origin`` at the
interior minimum corner.  A non-occupied cell counts as visible from a
sensor position when the straight segment from the cell centre to the sensor
leaves the grid through the open top face without entering an occupied cell.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import NoCandidate
from .geometry import RigidTransform

UNKNOWN, OCCUPIED, OCCLUDED, FREE = 0, 1, 2, 3
STATE_NAMES = {UNKNOWN: "unknown", OCCUPIED: "occupied", OCCLUDED: "occluded", FREE: "free"}
_NAME_TO_STATE = {v: k for k, v in STATE_NAMES.items()}


@dataclass(eq=False)
class OccupancyGrid:
    origin: np.ndarray
    cell: float
    dims: tuple
    cells: np.ndarray = None
    frame: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.dims = tuple(int(v) for v in self.dims)
        if self.cell <= 0 or min(self.dims) < 1:
            raise ValueError("cell size and dims must be positive")
        if self.cells is None:
            self.cells = np.full(self.dims, UNKNOWN, dtype=np.int8)
        elif self.cells.shape != self.dims:
            raise ValueError("cell array shape does not match dims")

    @classmethod
    def for_bin(cls, bin_box, cell=0.01):
        dims = tuple(max(1, int(math.ceil(e / cell - 1e-9))) for e in bin_box.extents)
        return cls(bin_box.interior_min, cell, dims, frame=bin_box.pose)

    def copy(self):
        return OccupancyGrid(self.origin.copy(), self.cell, self.dims, self.cells.copy(), self.frame)

    def centers(self):
        """Cell centres in the bin frame, shape (nx, ny, nz, 3)."""
        axes = [self.origin[a] + (np.arange(self.dims[a]) + 0.5) * self.cell for a in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def centers_world(self):
        return self.frame.apply(self.centers().reshape(-1, 3)).reshape(self.dims + (3,))

    def cell_index(self, points_world):
        """Integer indices of the cells holding each point and an in-grid mask."""
        q = self.frame.inverse_apply(np.asarray(points_world, dtype=float).reshape(-1, 3))
        idx = np.floor((q - self.origin) / self.cell).astype(np.int64)
        ok = np.all((idx >= 0) & (idx < np.array(self.dims)), axis=1)
        return idx, ok

    def count(self, state):
        return int(np.count_nonzero(self.cells == state))

    def mask(self, state):
        return self.cells == state


def mark_occupied(grid: OccupancyGrid, cloud, min_points=1) -> OccupancyGrid:
    out = grid.copy()
    if len(cloud) == 0:
        return out
    idx, ok = grid.cell_index(cloud.points)
    idx = idx[ok]
    counts = np.zeros(grid.dims, dtype=np.int64)
    np.add.at(counts, (idx[:, 0], idx[:, 1], idx[:, 2]), 1)
    out.cells[counts >= min_points] = OCCUPIED
    return out


def _in_frustum(points_world, sensor_pose, sensor):
    q = sensor_pose.pose.inverse_apply(points_world)
    z = q[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = (z > 0) & (np.abs(q[:, 0] / z) <= math.tan(sensor.fov_x / 2)) & (
            np.abs(q[:, 1] / z) <= math.tan(sensor.fov_y / 2))
    return ok


def blocked_from(grid: OccupancyGrid, position_world, blockers, starts=None, sensor_pose=None, sensor=None):
    """For each start (default: every cell centre) whether the sensor at ``position_world`` is hidden."""
    if starts is None:
        starts = grid.centers().reshape(-1, 3)
    target = grid.frame.inverse_apply(np.asarray(position_world, dtype=float))
    b = kernels.segments_blocked(np.ascontiguousarray(blockers, dtype=np.bool_), grid.origin, float(grid.cell),
                                 np.ascontiguousarray(starts, dtype=float), target)
    if sensor is not None and sensor_pose is not None:
        b |= ~_in_frustum(grid.frame.apply(starts), sensor_pose, sensor)
    return b


def mark_occluded(grid: OccupancyGrid, sensor_pose, cloud=None, sensor=None) -> OccupancyGrid:
    """Label non-occupied cells free (line of sight) or occluded.

    A cell already free from another pose of the same trial stays free.  The
    cloud argument is accepted for interface symmetry; blockers are the
    occupied cells, which already encode the measured surface.
    """
    out = grid.copy()
    flat = out.cells.reshape(-1)
    b = blocked_from(grid, sensor_pose.position, grid.cells == OCCUPIED, sensor_pose=sensor_pose, sensor=sensor)
    cand = flat != OCCUPIED
    flat[cand & ~b] = FREE
    flat[cand & b & (flat != FREE)] = OCCLUDED
    return out


def build_grid(bin_box, cloud, sensor_poses, cell=0.01, sensor=None, min_points=1) -> OccupancyGrid:
    """Grid for one trial: occupied from the merged cloud, then visibility from every pose used."""
    g = mark_occupied(OccupancyGrid.for_bin(bin_box, cell), cloud, min_points)
    for p in sensor_poses:
        g = mark_occluded(g, p, cloud, sensor)
    return g


def _best(candidates, scores, maximize):
    if not candidates:
        raise NoCandidate("no sensor pose candidates")
    key = (lambda i: (-scores[i], candidates[i].face_index, candidates[i].standoff)) if maximize else (
        lambda i: (scores[i], candidates[i].face_index, candidates[i].standoff))
    return min(range(len(candidates)), key=key)


def hidden_bottom_counts(grid: OccupancyGrid, candidates, sensor=None):
    """Bottom-layer cells hidden from each candidate in an empty bin (walls only)."""
    starts = grid.centers()[:, :, 0, :].reshape(-1, 3)
    empty = np.zeros(grid.dims, dtype=bool)
    return np.array([int(blocked_from(grid, c.position, empty, starts, c, sensor).sum()) for c in candidates])


def select_view_first(grid: OccupancyGrid, candidates, sensor=None):
    scores = hidden_bottom_counts(grid, candidates, sensor)
    return candidates[_best(candidates, scores, maximize=False)]


def view_scores(grid_prev: OccupancyGrid, candidates, sensor=None):
    """Previously occluded cells each candidate would see, occupied cells blocking."""
    occl = grid_prev.cells.reshape(-1) == OCCLUDED
    if not occl.any():
        return np.zeros(len(candidates), dtype=np.int64)
    starts = grid_prev.centers().reshape(-1, 3)[occl]
    blockers = grid_prev.cells == OCCUPIED
    return np.array([int((~blocked_from(grid_prev, c.position, blockers, starts, c, sensor)).sum())
                     for c in candidates], dtype=np.int64)


def select_view_next(grid_prev: OccupancyGrid, candidates, sensor=None, return_score=False):
    scores = view_scores(grid_prev, candidates, sensor)
    i = _best(candidates, scores, maximize=True)
    return (candidates[i], int(scores[i])) if return_score else candidates[i]


def classify_occluded(grid: OccupancyGrid, sv, ignore=None):
    """(n_blue, n_green): occluded cell centres inside / outside the swept volume.

    ``ignore`` optionally maps world points to a mask of centres that never
    count as blue (used for the grasped part's own interior).
    """
    occl = grid.cells.reshape(-1) == OCCLUDED
    total = int(occl.sum())
    if total == 0:
        return 0, 0
    pts = grid.frame.apply(grid.centers().reshape(-1, 3)[occl])
    inside = sv.contains(pts)
    if ignore is not None:
        inside &= ~ignore(pts)
    blue = int(inside.sum())
    return blue, total - blue


def occluded_centers(grid: OccupancyGrid):
    return grid.frame.apply(grid.centers().reshape(-1, 3)[grid.cells.reshape(-1) == OCCLUDED])


# --------------------------------------------------------------------------
# CSV


def save_grid_csv(path, grid: OccupancyGrid):
    with open(path, "w", newline="") as fh:
        fh.write("# origin=%r,%r,%r cell=%r dims=%d,%d,%d\n" % (*map(float, grid.origin), float(grid.cell), *grid.dims))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ix", "iy", "iz", "state"])
        for (ix, iy, iz), s in np.ndenumerate(grid.cells):
            w.writerow([ix, iy, iz, STATE_NAMES[int(s)]])


def load_grid_csv(path, frame=None):
    lines = Path(path).read_text().splitlines()
    meta = dict(tok.split("=") for tok in lines[0].lstrip("# ").split())
    origin = [float(v) for v in meta["origin"].split(",")]
    dims = tuple(int(v) for v in meta["dims"].split(","))
    grid = OccupancyGrid(origin, float(meta["cell"]), dims, frame=frame or RigidTransform.identity())
    for row in csv.DictReader(lines[1:]):
        grid.cells[int(row["ix"]), int(row["iy"]), int(row["iz"])] = _NAME_TO_STATE[row["state"]]
    return grid
