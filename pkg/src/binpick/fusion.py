"""Cloud merging across captures, Euclidean segmentation and ICP pose estimation."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ._accel import max_threads
from .errors import DegenerateSegment, EmptyCloud
from .geometry import DEFAULT_CATALOG, Cylinder, RigidTransform
from .plyio import PointCloud


@dataclass(eq=False)
class SegmentedCloud:
    """A cloud plus disjoint point-index sets, one per segment."""

    cloud: PointCloud
    segments: list = field(default_factory=list)

    def __post_init__(self):
        self.segments = [np.asarray(s, dtype=np.int64) for s in self.segments]

    def labels(self):
        """Per-point segment index, -1 for unsegmented points."""
        lab = np.full(len(self.cloud), -1, dtype=np.int64)
        for i, s in enumerate(self.segments):
            lab[s] = i
        return lab

    def segment_points(self, i):
        return self.cloud.points[self.segments[i]]

    def bounding_boxes(self):
        return [(self.cloud.points[s].min(axis=0), self.cloud.points[s].max(axis=0)) for s in self.segments]

    @classmethod
    def from_labels(cls, cloud, labels):
        labels = np.asarray(labels)
        k = int(labels.max()) + 1 if len(labels) else 0
        return cls(cloud, [np.flatnonzero(labels == i) for i in range(k)])


# --------------------------------------------------------------------------
# Merging


def merge_counts(prev: SegmentedCloud, current: PointCloud, min_distance=0.005):
    """near(i), far(i) per previous segment.

    Every current point votes for the segment owning its nearest previous
    point: near if that distance is below ``min_distance``, far otherwise.
    Votes landing on unsegmented previous points are dropped.
    """
    s = len(prev.segments)
    near = np.zeros(s, dtype=np.int64)
    far = np.zeros(s, dtype=np.int64)
    if len(prev.cloud) == 0 or len(current) == 0 or s == 0:
        return near, far
    dist, idx = cKDTree(prev.cloud.points).query(current.points)
    seg = prev.labels()[idx]
    ok = seg >= 0
    close = dist < min_distance
    np.add.at(near, seg[ok & close], 1)
    np.add.at(far, seg[ok & ~close], 1)
    return near, far


def merge_decisions(near, far, threshold=0.1):
    """Merge bit per segment: far/near below threshold; near = 0 never merges."""
    near = np.asarray(near)
    far = np.asarray(far)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(near > 0, far / np.maximum(near, 1), np.inf)
    return ratio < threshold


def voxel_dedup(points, voxel, reference=None):
    """Keep one point per voxel, dropping voxels already holding a reference point."""
    if len(points) == 0:
        return points
    keys = np.floor(points / voxel).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    first = np.sort(first)
    if reference is not None and len(reference):
        ref = {tuple(k) for k in np.floor(reference / voxel).astype(np.int64)}
        first = np.array([i for i in first if tuple(keys[i]) not in ref], dtype=np.int64)
    return points[first]


def merge_clouds(prev: SegmentedCloud, current: PointCloud, min_distance=0.005, threshold=0.1,
                 dedup_voxel=None, return_details=False):
    """Current points followed by the points of every accepted previous segment."""
    near, far = merge_counts(prev, current, min_distance)
    bits = merge_decisions(near, far, threshold)
    extra = [prev.segment_points(i) for i in range(len(bits)) if bits[i]]
    extra = np.vstack(extra) if extra else np.zeros((0, 3))
    if dedup_voxel and len(extra):
        extra = voxel_dedup(extra, dedup_voxel, current.points)
    out = PointCloud(np.vstack([current.points, extra]))
    return (out, near, far, bits) if return_details else out


# --------------------------------------------------------------------------
# Segmentation


def segment(cloud: PointCloud, cluster_tol=0.004, min_cluster=30, max_segments=8, bin_box=None):
    """Euclidean clusters (largest first); indices refer to ``cloud``.

    With ``bin_box`` given, floor and wall points are removed first.
    """
    keep = np.arange(len(cloud))
    if bin_box is not None and len(cloud):
        q = bin_box.to_bin_frame(cloud.points)
        w, d, _ = bin_box.extents
        tol = 0.003
        keep = np.flatnonzero((q[:, 2] > tol) & (np.abs(q[:, 0]) < w / 2 - tol) & (np.abs(q[:, 1]) < d / 2 - tol))
    if len(keep) == 0:
        raise EmptyCloud("no object points to segment")
    pts = cloud.points[keep]
    pairs = cKDTree(pts).query_pairs(cluster_tol, output_type="ndarray")
    n = len(pts)
    graph = coo_matrix((np.ones(len(pairs), dtype=np.int8), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    k, lab = connected_components(graph, directed=False)
    sizes = np.bincount(lab, minlength=k)
    order = sorted((c for c in range(k) if sizes[c] >= min_cluster), key=lambda c: (-sizes[c], c))
    order = order[:max_segments] if max_segments else order
    segs = [keep[np.flatnonzero(lab == c)] for c in order]
    return SegmentedCloud(cloud, segs)


# --------------------------------------------------------------------------
# Pose estimation


@dataclass(frozen=True, eq=False)
class PoseEstimate:
    shape_ref: str
    pose: RigidTransform
    fitness: float
    source: str = "new"
    id: int = -1
    history: tuple = ()

    def to_dict(self):
        return {"id": int(self.id), "shape": self.shape_ref, "pose": self.pose.as_matrix().tolist(),
                "fitness": float(self.fitness), "source": self.source}

    @classmethod
    def from_dict(cls, d):
        return cls(d["shape"], RigidTransform.from_matrix(d["pose"]), float(d["fitness"]), d.get("source", "new"),
                   int(d.get("id", -1)))


def save_estimates(path, estimates):
    Path(path).write_text(json.dumps({"version": 1, "estimates": [e.to_dict() for e in estimates]}, indent=1))


def load_estimates(path):
    data = json.loads(Path(path).read_text())
    return [PoseEstimate.from_dict(d) for d in data.get("estimates", [])]


def _kabsch(src, dst):
    """Rotation R and translation t minimizing sum |R src + t - dst|^2."""
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    H = (src - cs).T @ (dst - cd)
    U, _, Vt = np.linalg.svd(H)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0])
    R = Vt.T @ D @ U.T
    return R, cd - R @ cs


def surface_residuals(shape, pose, points):
    return np.abs(shape.signed_distance_local(pose.inverse_apply(points)))


def icp(points, shape, init: RigidTransform, max_iter=100, tol=1e-6, inlier_factor=3.0):
    """Point-to-surface ICP.  Returns (pose, fitness history); history is non-increasing."""
    pose = init
    fit = float(surface_residuals(shape, pose, points).mean())
    history = [fit]
    for _ in range(max_iter):
        local = pose.inverse_apply(points)
        closest = shape.closest_point_local(local)
        r = np.linalg.norm(local - closest, axis=1)
        inl = r <= max(inlier_factor * r.mean(), 1e-9)
        if inl.sum() < 3:
            break
        R, t = _kabsch(closest[inl], points[inl])
        cand = RigidTransform.from_rt(R, t, fix=True)
        new_fit = float(surface_residuals(shape, cand, points).mean())
        if new_fit > fit:
            break
        pose = cand
        change = fit - new_fit
        fit = new_fit
        history.append(fit)
        if change < tol:
            break
    return pose, history


def _pca(points):
    c = points.mean(axis=0)
    cov = np.cov((points - c).T)
    w, V = np.linalg.eigh(cov)
    order = np.argsort(w)[::-1]
    return c, w[order], V[:, order]


def init_hypotheses(points, shape):
    """PCA poses: model axes (longest first) onto principal axes, sign flips,
    and for boxes the two shorter model axes swapped."""
    c, w, V = _pca(points)
    lo, hi = shape.local_bounds()
    dims = hi - lo
    axis_order = list(np.argsort(-dims, kind="stable"))
    perms = [axis_order]
    if shape.kind == "box":
        perms.append([axis_order[0], axis_order[2], axis_order[1]])
    out = []
    for perm in perms:
        for s1 in (1.0, -1.0):
            for s3 in (1.0, -1.0):
                cols = [s1 * V[:, 0], None, s3 * V[:, 2]]
                cols[1] = np.cross(cols[2], cols[0])
                R = np.zeros((3, 3))
                for k in range(3):
                    R[:, perm[k]] = cols[k]
                if np.linalg.det(R) < 0:
                    R[:, perm[1]] *= -1.0
                # visible points sit on the surface facing the viewer: push the centre inward
                centre = c - cols[2] * dims[perm[2]] / 2
                out.append(RigidTransform.from_rt(R, centre, fix=True))
    return out


def canonical_roll(shape, pose):
    """Cylinders are symmetric about their axis, so ICP leaves the roll arbitrary.
    Fix it by pointing the local x axis as close to world -z as possible."""
    if not isinstance(shape, Cylinder):
        return pose
    a = pose.rotation[:, 2]
    g = np.array([0.0, 0.0, -1.0]) + a[2] * a
    n = np.linalg.norm(g)
    if n < 1e-9:
        return pose
    x = g / n
    return RigidTransform.from_rt(np.column_stack([x, np.cross(a, x), a]), pose.translation, fix=True)


def estimate_pose(points, shape_ref, init=None, catalog=None, max_iter=100, tol=1e-6, seg_id=-1):
    points = np.asarray(points, dtype=float)
    shape = (catalog or DEFAULT_CATALOG)[shape_ref]
    if len(points) < 10:
        raise DegenerateSegment(f"segment has {len(points)} points; need at least 10")
    _, w, _ = _pca(points)
    if w[1] <= 1e-12 * max(w[0], 1e-30):
        raise DegenerateSegment("segment points are collinear or coincident")
    inits = [init] if init is not None else init_hypotheses(points, shape)
    best = None
    for T in inits:
        pose, hist = icp(points, shape, T, max_iter, tol)
        if best is None or hist[-1] < best[1][-1]:
            best = (pose, hist)
    return PoseEstimate(shape_ref, canonical_roll(shape, best[0]), best[1][-1], "new", seg_id, tuple(best[1]))


# --------------------------------------------------------------------------
# Detection over a merged cloud


def pca_extents(points):
    c, _, V = _pca(points)
    proj = (points - c) @ V
    return np.ptp(proj, axis=0)


def match_shape(points, shape_refs, catalog, tol=0.3):
    """First catalog part whose two largest dimensions match the segment's PCA extents."""
    ext = pca_extents(points)[:2]
    for ref in shape_refs:
        dims = catalog[ref].sorted_dims()[:2]
        if np.all(np.abs(ext - dims) <= tol * dims):
            return ref
    return None


@dataclass(frozen=True)
class DetectConfig:
    cluster_tol: float = 0.004
    min_cluster: int = 30
    max_segments: int = 8
    bbox_tol: float = 0.3
    reuse_dist: float = 0.005
    parallelism: int = 1


def detect_all(merged: PointCloud, prev_estimates=(), reuse_dist=0.005, parallelism=1, *, shape_refs=("cylinder",),
               catalog=None, bin_box=None, config: DetectConfig = DetectConfig(), return_stats=False):
    """Segment, gate by size, reuse close previous estimates and run ICP on the rest.

    Results are ordered by segment index regardless of ``parallelism``.
    """
    catalog = catalog or DEFAULT_CATALOG
    try:
        seg = segment(merged, config.cluster_tol, config.min_cluster, config.max_segments, bin_box)
    except EmptyCloud:
        return ([], {"segments": 0, "icp": 0, "reused": 0}) if return_stats else []
    jobs = []
    for i in range(len(seg.segments)):
        pts = seg.segment_points(i)
        ref = match_shape(pts, shape_refs, catalog, config.bbox_tol)
        if ref is None:
            continue
        reused = None
        best_d = reuse_dist
        for e in prev_estimates:
            d = float(surface_residuals(catalog[e.shape_ref], e.pose, pts).mean())
            if d < best_d:
                reused, best_d = e, d
        jobs.append((i, pts, ref, reused))

    def run(job):
        i, pts, ref, reused = job
        if reused is not None:
            return replace(reused, source="reused", id=i)
        try:
            return estimate_pose(pts, ref, catalog=catalog, seg_id=i)
        except DegenerateSegment:
            return None

    workers = max_threads(parallelism)
    if workers <= 1 or len(jobs) <= 1:
        results = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, jobs))
    out = [r for r in results if r is not None]
    stats = {"segments": len(seg.segments), "icp": sum(j[3] is None for j in jobs), "reused": sum(j[3] is not None for j in jobs)}
    return (out, stats) if return_stats else out
