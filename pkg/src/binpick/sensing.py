"""Simulated wrist depth sensor: candidate viewpoints and ray-cast capture.

Candidate viewpoints lie on the face normals of a regular polyhedron centred
at the bin-bottom centre, at one or more standoff distances, looking back at
that centre.  The optical frame has z along the viewing direction, x to the
image right and y to the image bottom.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._accel import max_threads
from .geometry import BinBox, Box, Cylinder, RigidTransform
from .plyio import PointCloud

PHI = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class SensorModel:
    fov_x: float = 0.8
    fov_y: float = 0.8
    width: int = 200
    height: int = 200
    sigma: float = 0.0005
    min_range: float = 0.1
    max_range: float = 1.5

    def __post_init__(self):
        if not (0 < self.fov_x < math.pi and 0 < self.fov_y < math.pi):
            raise ValueError("field of view must lie in (0, pi)")
        if self.width < 1 or self.height < 1:
            raise ValueError("resolution must be at least 1x1")
        if self.sigma < 0 or self.min_range < 0 or self.max_range <= self.min_range:
            raise ValueError("bad noise or range settings")

    def pixel_directions(self):
        """Unit ray directions in the optical frame, row-major (H*W, 3)."""
        u = (np.arange(self.width) + 0.5) / self.width * 2.0 - 1.0
        v = (np.arange(self.height) + 0.5) / self.height * 2.0 - 1.0
        X, Y = np.meshgrid(u * math.tan(self.fov_x / 2), v * math.tan(self.fov_y / 2))
        d = np.stack([X.ravel(), Y.ravel(), np.ones(X.size)], axis=1)
        return d / np.linalg.norm(d, axis=1)[:, None]


@dataclass(frozen=True, eq=False)
class SensorPose:
    pose: RigidTransform
    face_index: int
    standoff: float

    @property
    def position(self):
        return self.pose.translation

    @property
    def axis(self):
        return self.pose.rotation[:, 2]


@dataclass(frozen=True)
class ReachabilityModel:
    """Stand-in for arm IK: a closed spherical shell plus elevation limits."""

    r_min: float = 0.30
    r_max: float = 0.70
    elev_min: float = math.radians(30.0)
    elev_max: float = math.radians(90.0)
    # grasp side: wrist distance from the bin centre and approach steepness
    wrist_r_max: float = 0.60
    approach_elev_min: float = math.radians(50.0)


def polyhedron_normals(n):
    """Outward unit face normals of the regular n-faced polyhedron in standard position."""
    if n == 4:
        N = np.array([[-1, -1, -1], [-1, 1, 1], [1, -1, 1], [1, 1, -1]], dtype=float)
    elif n == 6:
        N = np.vstack([np.eye(3), -np.eye(3)])
    elif n == 8:
        N = np.array([[a, b, c] for a in (1, -1) for b in (1, -1) for c in (1, -1)], dtype=float)
    elif n == 12:
        N = []
        for s1 in (1, -1):
            for s2 in (1, -1):
                N += [[0, s1, s2 * PHI], [s1, s2 * PHI, 0], [s1 * PHI, 0, s2]]
        N = np.array(N, dtype=float)
    elif n == 20:
        N = [[a, b, c] for a in (1, -1) for b in (1, -1) for c in (1, -1)]
        ip = 1.0 / PHI
        for s1 in (1, -1):
            for s2 in (1, -1):
                N += [[0, s1 * ip, s2 * PHI], [s1 * ip, s2 * PHI, 0], [s1 * PHI, 0, s2 * ip]]
        N = np.array(N, dtype=float)
    else:
        raise ValueError(f"no regular polyhedron with {n} faces")
    return N / np.linalg.norm(N, axis=1)[:, None]


def look_at(position, target):
    """Optical-frame pose at ``position`` with +z pointing to ``target``."""
    position = np.asarray(position, dtype=float)
    z = np.asarray(target, dtype=float) - position
    z /= np.linalg.norm(z)
    ref = np.array([0.0, 1.0, 0.0]) if abs(z[2]) > 0.99 else np.array([0.0, 0.0, 1.0])
    x = np.cross(z, ref)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return RigidTransform.from_rt(np.column_stack([x, y, z]), position, fix=True)


def candidate_poses(bin_box: BinBox, faces=20, standoffs=(0.45, 0.60)):
    """One viewpoint per upward (or horizontal) face and standoff.

    Faces are indexed by descending normal z, then azimuth, so index 0 is the
    most top-down view.  Order is (face_index, standoff).
    """
    if any(l <= 0 for l in standoffs):
        raise ValueError("standoffs must be positive")
    N = polyhedron_normals(faces)
    N = N[N[:, 2] >= -1e-12]
    az = np.mod(np.arctan2(N[:, 1], N[:, 0]), 2 * math.pi)
    order = sorted(range(len(N)), key=lambda i: (-round(N[i, 2], 12), round(az[i], 12)))
    center = bin_box.bottom_center
    out = []
    for fi, k in enumerate(order):
        n_world = bin_box.pose.rotation @ N[k]
        for l in standoffs:
            out.append(SensorPose(look_at(center + l * n_world, center), fi, float(l)))
    return out


def elevation(pose: SensorPose, center=np.zeros(3)):
    v = pose.position - center
    return math.atan2(v[2], math.hypot(v[0], v[1]))


def reachable(pose: SensorPose, reach: ReachabilityModel, center=np.zeros(3)):
    """Closed-set test: shell radius and elevation both within limits."""
    r = float(np.linalg.norm(pose.position - center))
    e = elevation(pose, center)
    return reach.r_min <= r <= reach.r_max and reach.elev_min - 1e-12 <= e <= reach.elev_max + 1e-12


# --------------------------------------------------------------------------
# Capture


def _primitive_table(scene):
    kinds, rots, trans, params, ids, meshes = [], [], [], [], [], []
    for shape, pose in scene.bin.parts():
        kinds.append(kernels.BOX)
        rots.append(pose.rotation)
        trans.append(pose.translation)
        params.append(shape.half)
        ids.append(-1)
    for o in scene.objects:
        shape = scene.shape_of(o)
        if isinstance(shape, Box):
            kinds.append(kernels.BOX)
            params.append(shape.half)
        elif isinstance(shape, Cylinder):
            kinds.append(kernels.CYLINDER)
            params.append([shape.radius, shape.height / 2, 0.0])
        else:
            meshes.append((o.id, shape, o.pose))
            continue
        rots.append(o.pose.rotation)
        trans.append(o.pose.translation)
        ids.append(o.id)
    return (np.array(kinds, dtype=np.int64), np.array(rots, dtype=float).reshape(-1, 3, 3),
            np.array(trans, dtype=float).reshape(-1, 3), np.array(params, dtype=float).reshape(-1, 3),
            np.array(ids, dtype=np.int64), meshes)


def cast_rays(scene, origins, dirs, threads=1):
    """Nearest hit distance and hit id (-1 bin, -2 none) for each ray."""
    kinds, rots, trans, params, ids, meshes = _primitive_table(scene)
    origins = np.ascontiguousarray(origins, dtype=float)
    dirs = np.ascontiguousarray(dirs, dtype=float)

    def block(sl):
        t, which = kernels.ray_primitives(origins[sl], dirs[sl], kinds, rots, trans, params)
        hit = np.where(which >= 0, ids[np.maximum(which, 0)], -2)
        for oid, shape, pose in meshes:
            tm = shape.ray_cast_local(pose.inverse_apply(origins[sl]), dirs[sl] @ pose.rotation)
            better = tm < t
            t = np.where(better, tm, t)
            hit = np.where(better, oid, hit)
        return t, hit

    n = len(origins)
    workers = max_threads(threads)
    if workers <= 1 or n < 2 * workers:
        return block(slice(0, n))
    edges = np.linspace(0, n, workers + 1).astype(int)
    with ThreadPoolExecutor(workers) as ex:
        parts = list(ex.map(block, [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def capture(scene, sensor: SensorModel, pose: SensorPose, seed=0, threads=1, return_ids=False):
    """Ray-cast one depth image and return the hit points in the world frame.

    Noise is drawn for the whole pixel array from a counter-based generator
    keyed by ``seed``, so the result does not depend on how rows are split
    across threads.
    """
    d_cam = sensor.pixel_directions()
    dirs = d_cam @ pose.pose.rotation.T
    origins = np.broadcast_to(pose.position, dirs.shape)
    t, hit = cast_rays(scene, origins, dirs, threads)
    if sensor.sigma > 0:
        noise = np.random.Generator(np.random.Philox(int(seed))).standard_normal(len(t)) * sensor.sigma
    else:
        noise = np.zeros(len(t))
    keep = np.isfinite(t) & (t >= sensor.min_range) & (t <= sensor.max_range)
    depth = t[keep] + noise[keep]
    pts = pose.position + depth[:, None] * dirs[keep]
    cloud = PointCloud(pts)
    return (cloud, hit[keep]) if return_ids else cloud


def strip_bin_points(cloud: PointCloud, bin_box: BinBox, tol=0.003):
    """Drop points on the bin floor, walls or rims (keep the interior, above the floor)."""
    if len(cloud) == 0:
        return cloud
    q = bin_box.to_bin_frame(cloud.points)
    w, d, _ = bin_box.extents
    keep = (q[:, 2] > tol) & (np.abs(q[:, 0]) < w / 2 - tol) & (np.abs(q[:, 1]) < d / 2 - tol)
    return cloud.subset(keep)
