"""Finger swept volumes and the binned neighbour-point feature vector.

Grasp frame: z is the approach direction, y the finger motion direction and
x the normal of the finger motion plane.  The origin is the midpoint between
the fingertips at the final grasp, so the fingers occupy z in [-L, 0] at the
end of the motion and the bottom of the swept volume is its largest z.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import PointOutsideVolume
from .geometry import DEFAULT_CATALOG, RigidTransform

DEFAULT_BINS = (5, 5, 0.01, 0.01)


@dataclass(frozen=True)
class GripperModel:
    finger_width: float = 0.015
    finger_thickness: float = 0.010
    finger_length: float = 0.060
    preshape: float = 0.060
    closed: float = 0.0
    approach_depth: float = 0.040

    def __post_init__(self):
        dims = (self.finger_width, self.finger_thickness, self.finger_length, self.preshape, self.approach_depth)
        if min(dims) <= 0 or self.closed < 0:
            raise ValueError("gripper dimensions must be positive")
        if self.preshape <= self.closed:
            raise ValueError("preshape opening must exceed the closed opening")


@dataclass(frozen=True, eq=False)
class SweptVolume:
    """Union of four grasp-frame boxes: approach sweeps (0, 1) and grasp sweeps (2, 3)."""

    frame: RigidTransform
    boxes: np.ndarray  # (4, 2, 3) lo/hi corners, margin included
    margin: float = 0.002

    @property
    def bottom(self):
        return float(self.boxes[:, 1, 2].max())

    @property
    def approach_boxes(self):
        return self.boxes[:2]

    @property
    def grasp_boxes(self):
        return self.boxes[2:]

    def to_local(self, points_world):
        return self.frame.inverse_apply(np.asarray(points_world, dtype=float).reshape(-1, 3))

    def box_index_local(self, local, tol=0.0):
        """Index of the first box containing each local point, -1 if none."""
        idx = np.full(len(local), -1, dtype=np.int64)
        for b in range(len(self.boxes) - 1, -1, -1):
            inside = np.all((local >= self.boxes[b, 0] - tol) & (local <= self.boxes[b, 1] + tol), axis=1)
            idx[inside] = b
        return idx

    def contains_local(self, local, tol=0.0):
        return self.box_index_local(np.atleast_2d(local), tol) >= 0

    def contains(self, points_world, tol=0.0):
        return self.contains_local(self.to_local(points_world), tol)

    def obbs(self):
        """World-frame (centers, rotations, half extents) of the four boxes."""
        c_loc = self.boxes.mean(axis=1)
        half = (self.boxes[:, 1] - self.boxes[:, 0]) / 2
        R = np.broadcast_to(self.frame.rotation, (len(self.boxes), 3, 3))
        return self.frame.apply(c_loc), R, half

    def bounding_sphere(self):
        lo, hi = self.boxes[:, 0].min(axis=0), self.boxes[:, 1].max(axis=0)
        c = (lo + hi) / 2
        return self.frame.apply(c), float(np.linalg.norm(hi - lo) / 2)

    def volume(self):
        """Exact union volume by inclusion-exclusion over the boxes."""
        total = 0.0
        n = len(self.boxes)
        for k in range(1, n + 1):
            for sub in itertools.combinations(range(n), k):
                lo = self.boxes[list(sub), 0].max(axis=0)
                hi = self.boxes[list(sub), 1].min(axis=0)
                total += (-1) ** (k + 1) * float(np.prod(np.maximum(hi - lo, 0.0)))
        return total


def sweep_boxes(gripper: GripperModel, width=None, margin=0.002):
    """Local box corners for the given final opening ``width`` (default: closed)."""
    fw, ft, L = gripper.finger_width, gripper.finger_thickness, gripper.finger_length
    pre = gripper.preshape
    theta = gripper.closed if width is None else float(np.clip(width, gripper.closed, pre))
    D = gripper.approach_depth
    x = (-fw / 2, fw / 2)
    approach = ((x[0], pre / 2, -(L + D)), (x[1], pre / 2 + ft, 0.0))
    grasp = ((x[0], theta / 2, -L), (x[1], pre / 2 + ft, 0.0))
    boxes = []
    for lo, hi in (approach, grasp):
        lo, hi = np.array(lo), np.array(hi)
        boxes.append((lo, hi))
        boxes.append((np.array([lo[0], -hi[1], lo[2]]), np.array([hi[0], -lo[1], hi[2]])))
    boxes = np.array([[lo, hi] for lo, hi in boxes], dtype=float)
    boxes[:, 0] -= margin
    boxes[:, 1] += margin
    return boxes


def build_swept_volume(grasp, gripper: GripperModel = GripperModel(), margin=0.002, width=None):
    """Swept volume for a grasp (an object with ``pose``/``width`` or a bare transform)."""
    pose = grasp if isinstance(grasp, RigidTransform) else grasp.pose
    if width is None and not isinstance(grasp, RigidTransform):
        width = getattr(grasp, "width", None)
    return SweptVolume(pose, sweep_boxes(gripper, width, margin), margin)


def neighbor_points(cloud, sv: SweptVolume, target=None, target_dist=0.003, catalog=None):
    """Cloud points inside the volume lying more than ``target_dist`` outside the target, in sv frame."""
    pts = cloud.points if hasattr(cloud, "points") else np.asarray(cloud, dtype=float).reshape(-1, 3)
    local = sv.to_local(pts)
    keep = sv.contains_local(local)
    if target is not None and keep.any():
        shape = (catalog or DEFAULT_CATALOG)[target.shape_ref]
        sd = shape.signed_distance_local(target.pose.inverse_apply(pts[keep]))
        k = np.flatnonzero(keep)
        keep[k[sd <= target_dist]] = False
    return local[keep]


@dataclass(frozen=True, eq=False)
class FeatureVector:
    counts: np.ndarray
    params: tuple = DEFAULT_BINS

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        if len(c) != self.params[0] * self.params[1] or (c < 0).any():
            raise ValueError("feature length must be b_y*b_z with non-negative entries")
        object.__setattr__(self, "counts", c)

    def __len__(self):
        return len(self.counts)

    def __array__(self, dtype=None, copy=None):
        return self.counts.astype(dtype) if dtype else self.counts

    def total(self):
        return int(self.counts.sum())


def point_bins(local, sv: SweptVolume, by=5, bz=5, wy=0.01, wz=0.01):
    """(d, h, j_y, j_z, box) for local points; box is -1 outside the volume."""
    local = np.atleast_2d(np.asarray(local, dtype=float))
    b = sv.box_index_local(local)
    bb = sv.boxes[np.maximum(b, 0)]
    d = np.minimum(local[:, 1] - bb[:, 0, 1], bb[:, 1, 1] - local[:, 1])
    h = sv.bottom - local[:, 2]
    jy = np.minimum(np.floor(d / wy).astype(np.int64), by - 1)
    jz = np.minimum(np.floor(h / wz).astype(np.int64), bz - 1)
    return d, h, jy, jz, b


def featurize(local_points, sv: SweptVolume, by=5, bz=5, wy=0.01, wz=0.01) -> FeatureVector:
    local = np.asarray(local_points, dtype=float).reshape(-1, 3)
    if len(local) == 0:
        return FeatureVector(np.zeros(by * bz, dtype=np.int64), (by, bz, wy, wz))
    _, _, jy, jz, b = point_bins(local, sv, by, bz, wy, wz)
    if (b < 0).any():
        raise PointOutsideVolume(f"{int((b < 0).sum())} point(s) lie outside the swept volume")
    return FeatureVector(np.bincount(jy * bz + jz, minlength=by * bz), (by, bz, wy, wz))


def target_masks(points, estimates, target_dist=0.003, catalog=None):
    """(E, N) mask of points within ``target_dist`` of (or inside) each estimate."""
    catalog = catalog or DEFAULT_CATALOG
    out = np.zeros((max(len(estimates), 1), len(points)), dtype=np.bool_)
    for i, e in enumerate(estimates):
        out[i] = catalog[e.shape_ref].signed_distance_local(e.pose.inverse_apply(points)) <= target_dist
    return out


def batch_features(points, svs, groups, exclude, by=5, bz=5, wy=0.01, wz=0.01):
    """Feature counts for many swept volumes at once, shape (C, by*bz).

    ``groups[c]`` selects the row of ``exclude`` (target-point mask) used for
    volume ``c``; -1 excludes nothing.
    """
    C = len(svs)
    if C == 0:
        return np.zeros((0, by * bz), dtype=np.int64)
    nb = len(svs[0].boxes)
    rots = np.array([sv.frame.rotation for sv in svs])
    trans = np.array([sv.frame.translation for sv in svs])
    boxes = np.array([sv.boxes for sv in svs]).reshape(C, nb, 2, 3)
    bottoms = np.array([sv.bottom for sv in svs])
    spheres = [sv.bounding_sphere() for sv in svs]
    centers = np.array([s[0] for s in spheres])
    radii = np.array([s[1] for s in spheres]) + 1e-9
    return kernels.sweep_counts(np.ascontiguousarray(points, dtype=float), np.ascontiguousarray(exclude, dtype=np.bool_),
                                np.asarray(groups, dtype=np.int64), rots, trans, boxes, bottoms, centers, radii,
                                int(by), int(bz), float(wy), float(wz))


# --------------------------------------------------------------------------
# CSV interchange


def write_feature_csv(path, rows, n_features=25):
    """rows: iterable of (counts, label) with label truthy for success."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"f_{i}" for i in range(n_features)])
        for counts, label in rows:
            w.writerow([int(bool(label))] + [int(v) for v in np.asarray(counts)])


def read_feature_csv(path):
    with open(Path(path), newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        n = len(header) - 1
        X, y = [], []
        for row in r:
            if not row:
                continue
            lab = row[0].strip().lower()
            y.append(1 if lab in ("1", "success", "true") else 0)
            X.append([int(v) for v in row[1:]])
    return np.array(X, dtype=np.int64).reshape(-1, n), np.array(y, dtype=np.int64)
