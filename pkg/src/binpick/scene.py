"""Ground-truth bin scenes: parts laid flat and close-packed on the bin bottom.

Every resting orientation used here has the property that the horizontal
cross-section through the part's mid height equals its full floor footprint,
so the 3-D clearance between two resting parts equals the 2-D distance
between their footprints.  Placement and the push test run in 2-D.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .errors import PlacementFailed, UnknownId
from .geometry import (DEFAULT_CATALOG, BinBox, Box, Cylinder, RigidTransform, TriangleMesh, rot_x,
                       rot_y, rot_z, shape_from_dict, shape_to_dict)

TOUCH_TOL = 1e-9

DEFAULT_ORIENTATIONS = {"cylinder": ("side",), "box": ("x-up", "y-up"), "mesh": ("z-up",)}


# --------------------------------------------------------------------------
# Resting orientations


def resting_pose(shape, orientation, x, y, yaw):
    """Pose of ``shape`` resting on z = 0 in the given orientation."""
    Rz = rot_z(yaw)
    if isinstance(shape, Cylinder):
        if orientation == "side":
            R, z = Rz @ rot_y(math.pi / 2), shape.radius
        elif orientation == "base":
            R, z = Rz, shape.height / 2
        else:
            raise ValueError(f"cylinder orientation {orientation!r}")
    elif isinstance(shape, Box):
        w, d, h = shape.extents
        table = {"x-up": (rot_y(-math.pi / 2), w / 2), "y-up": (rot_x(math.pi / 2), d / 2), "z-up": (np.eye(3), h / 2)}
        if orientation not in table:
            raise ValueError(f"box orientation {orientation!r}")
        R0, z = table[orientation]
        R = Rz @ R0
    else:
        R = Rz
        z = -float(shape.local_bounds()[0][2])
    return RigidTransform.from_rt(R, [x, y, z], fix=True)


# --------------------------------------------------------------------------
# 2-D footprints


@dataclass(frozen=True, eq=False)
class Footprint:
    """Convex floor footprint: a polygon (CCW vertices) or a disk."""

    center: np.ndarray
    vertices: np.ndarray = None
    radius: float = 0.0

    @property
    def is_disk(self):
        return self.vertices is None

    def translated(self, offset):
        offset = np.asarray(offset, dtype=float)
        v = None if self.vertices is None else self.vertices + offset
        return Footprint(self.center + offset, v, self.radius)

    def area(self):
        if self.is_disk:
            return math.pi * self.radius ** 2
        x, y = self.vertices.T
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def footprint(shape, pose):
    c = pose.translation[:2].copy()
    R = pose.rotation
    if isinstance(shape, Cylinder) and abs(abs(R[2, 2]) - 1.0) < 1e-6:
        return Footprint(c, None, shape.radius)
    if isinstance(shape, TriangleMesh):
        pts = pose.apply(shape.vertices)[:, :2]
        hull = ConvexHull(pts)
        return Footprint(c, pts[hull.vertices])
    if isinstance(shape, Cylinder):
        ax = R[:2, 2] * shape.height / 2
        perp = np.array([-ax[1], ax[0]])
        perp = perp / np.linalg.norm(perp) * shape.radius
    else:
        half = shape.half
        flat = [k for k in range(3) if abs(R[2, k]) < 0.5]
        if len(flat) != 2:
            pts = pose.apply(shape.corners_local())[:, :2]
            hull = ConvexHull(pts)
            return Footprint(c, pts[hull.vertices])
        ax = R[:2, flat[0]] * half[flat[0]]
        perp = R[:2, flat[1]] * half[flat[1]]
    if ax[0] * perp[1] - ax[1] * perp[0] < 0:
        perp = -perp
    # CCW rectangle
    return Footprint(c, np.array([c + ax + perp, c - ax + perp, c - ax - perp, c + ax - perp]))


def _poly_axes(v):
    e = np.roll(v, -1, axis=0) - v
    n = np.stack([e[:, 1], -e[:, 0]], axis=1)
    return n / np.linalg.norm(n, axis=1)[:, None]


def _point_poly_sd(p, v):
    """Signed distance from point p to convex polygon v (negative inside)."""
    outside = np.max(np.einsum("ij,ij->i", p - v, _poly_axes(v))) > 0
    ab = np.roll(v, -1, axis=0) - v
    t = np.clip(np.einsum("ij,ij->i", p - v, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    dist = np.min(np.linalg.norm(v + t[:, None] * ab - p, axis=1))
    return dist if outside else -dist


def _sat_separation(va, vb):
    """Largest separation over both polygons' edge normals (minus penetration depth if overlapping)."""
    axes = np.vstack([_poly_axes(va), _poly_axes(vb)])
    pa = va @ axes.T
    pb = vb @ axes.T
    return float(np.maximum(pb.min(axis=0) - pa.max(axis=0), pa.min(axis=0) - pb.max(axis=0)).max())


def _overlaps(a: Footprint, b: Footprint, tol):
    """Same as ``footprint_distance(a, b) < -tol`` without the exact-distance pass."""
    if a.is_disk or b.is_disk:
        return footprint_distance(a, b) < -tol
    return _sat_separation(a.vertices, b.vertices) < -tol


def footprint_distance(a: Footprint, b: Footprint):
    """Clearance between footprints; negative when they overlap."""
    if a.is_disk and b.is_disk:
        return float(np.linalg.norm(a.center - b.center) - a.radius - b.radius)
    if a.is_disk or b.is_disk:
        disk, poly = (a, b) if a.is_disk else (b, a)
        return float(_point_poly_sd(disk.center, poly.vertices) - disk.radius)
    va, vb = a.vertices, b.vertices
    best = _sat_separation(va, vb)
    if best <= 0:
        return best

    def vert_edge(p, q):
        a0 = q
        b0 = np.roll(q, -1, axis=0)
        ab = b0 - a0
        t = np.clip(np.einsum("pij,ij->pi", p[:, None, :] - a0[None], ab) / np.einsum("ij,ij->i", ab, ab), 0, 1)
        proj = a0[None] + t[..., None] * ab[None]
        return np.linalg.norm(proj - p[:, None, :], axis=2).min()

    return float(min(vert_edge(va, vb), vert_edge(vb, va)))


def wall_clearance(fp: Footprint, bin_box: BinBox):
    """Distance from the footprint to the nearest inner wall (negative if it pokes through)."""
    w, d, _ = bin_box.extents
    if fp.is_disk:
        return float(min(w / 2 - abs(fp.center[0]), d / 2 - abs(fp.center[1])) - fp.radius)
    v = fp.vertices
    return float(min((w / 2 - np.abs(v[:, 0])).min(), (d / 2 - np.abs(v[:, 1])).min()))


# --------------------------------------------------------------------------
# Scene types


@dataclass(frozen=True, eq=False)
class SceneObject:
    id: int
    shape_ref: str
    pose: RigidTransform
    traversable: bool = True


@dataclass(frozen=True, eq=False)
class SceneConfig:
    count: int = 9
    parts: tuple = ("cylinder",)
    bin_extents: tuple = (0.30, 0.24, 0.08)
    wall: float = 0.01
    max_gap: float = 0.012
    min_clearance: float = 0.0
    max_attempts: int = 400
    orientations: dict = field(default_factory=lambda: dict(DEFAULT_ORIENTATIONS))
    push_delta: float = 0.015
    push_directions: int = 8
    jitter: bool = False
    jitter_magnitude: float = 0.003


@dataclass(frozen=True, eq=False)
class Scene:
    bin: BinBox
    objects: tuple
    rng_seed: int = 0
    catalog: dict = field(default_factory=lambda: dict(DEFAULT_CATALOG))

    def __len__(self):
        return len(self.objects)

    @property
    def ids(self):
        return [o.id for o in self.objects]

    def get(self, obj_id):
        for o in self.objects:
            if o.id == obj_id:
                return o
        raise UnknownId(obj_id)

    def shape_of(self, obj):
        return self.catalog[obj.shape_ref]

    def footprints(self):
        return {o.id: footprint(self.shape_of(o), o.pose) for o in self.objects}

    def identical_to(self, other):
        if len(self.objects) != len(other.objects) or self.rng_seed != other.rng_seed:
            return False
        return all(a.id == b.id and a.shape_ref == b.shape_ref and a.traversable == b.traversable
                   and np.array_equal(a.pose.as_matrix(), b.pose.as_matrix())
                   for a, b in zip(self.objects, other.objects))


def _reach(fp):
    if fp.is_disk:
        return fp.radius
    return float(np.max(np.linalg.norm(fp.vertices - fp.center, axis=1)))


def _min_clearance(fp, placed_fps, cutoff):
    r = _reach(fp)
    best = np.inf
    for o in placed_fps:
        if np.linalg.norm(fp.center - o.center) - r - _reach(o) > cutoff:
            continue
        best = min(best, footprint_distance(fp, o))
    return best


def _slide_in(placed_fps, base_fp, start, target, gap, tol=1e-6, max_iter=200):
    """Move from ``start`` toward ``target`` until the clearance to the pile equals ``gap``.

    Conservative advancement: clearance is 1-Lipschitz in the offset, so a
    step equal to the current slack never overshoots.  A start already
    closer than ``gap`` (but not overlapping) is kept where it is.  Returns
    None on overlap or if nothing is reached.
    """
    u = target - start
    length = float(np.linalg.norm(u))
    if length == 0.0:
        return None
    u = u / length
    t = 0.0
    for _ in range(max_iter):
        slack = _min_clearance(base_fp.translated(start + t * u), placed_fps, gap + length) - gap
        if slack < 0:
            return start if t == 0.0 and slack + gap >= 0 else None
        if slack <= tol:
            return start + t * u
        t += slack
        if t > length:
            return None
    return None


def generate_scene(config: SceneConfig, seed: int, catalog=None) -> Scene:
    """Deterministically lay ``config.count`` parts flat and close together."""
    rng = np.random.default_rng(seed)
    catalog = dict(DEFAULT_CATALOG) if catalog is None else {**DEFAULT_CATALOG, **catalog}
    bin_box = BinBox(tuple(config.bin_extents), config.wall)
    w, d, _ = bin_box.extents
    names = [config.parts[int(rng.integers(len(config.parts)))] for _ in range(config.count)]

    def min_area(name):
        shape = catalog[name]
        return min(footprint(shape, resting_pose(shape, o, 0, 0, 0)).area()
                   for o in config.orientations[shape.kind])

    if sum(min_area(n) for n in names) > w * d:
        raise PlacementFailed("parts cannot fit in the bin (area bound)")

    placed = []  # (SceneObject, Footprint)
    lo_gap = max(0.0, config.min_clearance)
    for i, name in enumerate(names):
        shape = catalog[name]
        orients = config.orientations[shape.kind]
        for _ in range(config.max_attempts):
            orient = orients[int(rng.integers(len(orients)))]
            yaw = float(rng.uniform(0.0, 2 * math.pi))
            base = resting_pose(shape, orient, 0.0, 0.0, yaw)
            base_fp = footprint(shape, base)
            if not placed:
                offset = np.array([rng.uniform(-w / 8, w / 8), rng.uniform(-d / 8, d / 8)])
            else:
                # enter from the wall along a random ray through the first part
                hub = placed[0][0].pose.translation[:2]
                phi = float(rng.uniform(0.0, 2 * math.pi))
                u = np.array([math.cos(phi), math.sin(phi)])
                lo, hi = 0.0, float(w + d)
                if wall_clearance(base_fp.translated(hub), bin_box) < 0:
                    continue
                for _ in range(40):
                    mid = 0.5 * (lo + hi)
                    if wall_clearance(base_fp.translated(hub + mid * u), bin_box) >= 0:
                        lo = mid
                    else:
                        hi = mid
                start = hub + lo * u
                # compact toward the first part so free space stays in one piece
                gap = float(rng.uniform(lo_gap, max(lo_gap, config.max_gap)))
                offset = _slide_in([f for _, f in placed], base_fp, start, hub, gap)
                if offset is None:
                    continue
            fp = base_fp.translated(offset)
            if wall_clearance(fp, bin_box) < 0:
                continue
            if _min_clearance(fp, [f for _, f in placed], lo_gap) < lo_gap - TOUCH_TOL:
                continue
            pose = RigidTransform(base.rotation, [offset[0], offset[1], base.translation[2]])
            placed.append((SceneObject(i, name, pose), fp))
            break
        else:
            raise PlacementFailed(f"could not place object {i} after {config.max_attempts} attempts")

    scene = Scene(bin_box, tuple(o for o, _ in placed), int(seed), catalog)
    return assign_traversability(scene, config.push_delta, config.push_directions)


def push_free(scene, obj_id, delta=0.015, directions=8, steps=4):
    """Per-direction flags: can the object slide ``delta`` that way untouched?"""
    fps = scene.footprints()
    me = fps[obj_id]
    r_me = _reach(me) + delta
    others = [fp for k, fp in fps.items()
              if k != obj_id and np.linalg.norm(fp.center - me.center) <= r_me + _reach(fp) + TOUCH_TOL]
    free = []
    for k in range(directions):
        ang = 2 * math.pi * k / directions
        u = np.array([math.cos(ang), math.sin(ang)])
        ok = True
        for s in range(1, steps + 1):
            moved = me.translated(u * delta * s / steps)
            if wall_clearance(moved, scene.bin) < -TOUCH_TOL or any(
                    _overlaps(moved, o, TOUCH_TOL) for o in others):
                ok = False
                break
        free.append(ok)
    return free


def assign_traversability(scene: Scene, delta=0.015, directions=8) -> Scene:
    """Mark each object traversable iff at least one push direction is free."""
    objs = tuple(replace(o, traversable=any(push_free(scene, o.id, delta, directions))) for o in scene.objects)
    return replace(scene, objects=objs)


def remove_object(scene: Scene, obj_id) -> Scene:
    scene.get(obj_id)
    return replace(scene, objects=tuple(o for o in scene.objects if o.id != obj_id))


def jitter_neighbors(scene: Scene, removed_fp: Footprint, rng, magnitude=0.003, radius=0.01) -> Scene:
    """Nudge objects that were within ``radius`` of a removed footprint."""
    fps = scene.footprints()
    objs = list(scene.objects)
    for i, o in enumerate(objs):
        if footprint_distance(fps[o.id], removed_fp) > radius:
            continue
        off = rng.uniform(-magnitude, magnitude, size=2)
        moved = fps[o.id].translated(off)
        others = [fp for k, fp in fps.items() if k != o.id]
        if wall_clearance(moved, scene.bin) < 0 or any(footprint_distance(moved, f) < 0 for f in others):
            continue
        t = o.pose.translation + np.array([off[0], off[1], 0.0])
        objs[i] = replace(o, pose=RigidTransform(o.pose.rotation, t))
        fps[o.id] = moved
    return replace(scene, objects=tuple(objs))


# --------------------------------------------------------------------------
# JSON


def scene_to_dict(scene: Scene):
    used = sorted({o.shape_ref for o in scene.objects} | set(k for k in scene.catalog if k in DEFAULT_CATALOG))
    return {
        "version": 1,
        "rng_seed": int(scene.rng_seed),
        "bin": {"extents": list(scene.bin.extents), "wall": scene.bin.wall,
                "pose": scene.bin.pose.as_matrix().tolist()},
        "shapes": [shape_to_dict(n, scene.catalog[n]) for n in used if not isinstance(scene.catalog[n], TriangleMesh)],
        "objects": [{"id": o.id, "shape": o.shape_ref, "pose": o.pose.as_matrix().tolist(),
                     "traversable": bool(o.traversable)} for o in scene.objects],
    }


def scene_from_dict(data, base_dir=None):
    catalog = dict(DEFAULT_CATALOG)
    for entry in data.get("shapes", []):
        catalog[entry["name"]] = shape_from_dict(entry, base_dir)
    b = data["bin"]
    bin_box = BinBox(tuple(b["extents"]), b["wall"], RigidTransform.from_matrix(b.get("pose", np.eye(4))))
    objs = tuple(SceneObject(int(o["id"]), o["shape"], RigidTransform.from_matrix(o["pose"]), bool(o["traversable"]))
                 for o in data["objects"])
    return Scene(bin_box, objs, int(data.get("rng_seed", 0)), catalog)


def save_scene(path, scene):
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=1))


def load_scene(path):
    path = Path(path)
    return scene_from_dict(json.loads(path.read_text()), base_dir=path.parent)
