"""Rigid transforms, primitive shapes and the point/ray queries on them.

Every shape lives in its own local frame; callers pass a
:class:`RigidTransform` mapping local coordinates to the world.  Boxes and
cylinders are centered at the local origin (cylinder axis = local z).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

ORTHO_TOL = 1e-9


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# Transforms


def rot_x(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle(axis, angle):
    """Rodrigues rotation matrix."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def random_rotation(rng):
    """Uniformly distributed rotation (unit quaternion method)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def orthonormalize(R):
    """Nearest rotation matrix (SVD projection)."""
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid motion ``p -> R p + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise ValueError("transform has non-finite entries")
        if np.abs(R.T @ R - np.eye(3)).max() > ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation is not a proper orthonormal matrix")
        object.__setattr__(self, "rotation", _frozen(R))
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_matrix(cls, M):
        M = np.asarray(M, dtype=float)
        return cls(M[:3, :3], M[:3, 3])

    @classmethod
    def trusted(cls, R, t):
        """Skip validation; for products of already valid transforms."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "rotation", _frozen(R))
        object.__setattr__(obj, "translation", _frozen(t))
        return obj

    @classmethod
    def from_rt(cls, R, t, fix=False):
        """Build from possibly slightly drifted R (``fix`` re-orthonormalizes)."""
        return cls(orthonormalize(R) if fix else R, t)

    def as_matrix(self):
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def apply(self, points):
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def apply_vector(self, v):
        return np.asarray(v, dtype=float) @ self.rotation.T

    def inverse(self):
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def inverse_apply(self, points):
        p = np.asarray(points, dtype=float)
        return (p - self.translation) @ self.rotation

    def __matmul__(self, other):
        R = self.rotation @ other.rotation
        return RigidTransform.from_rt(R, self.rotation @ other.translation + self.translation, fix=True)

    def almost_equal(self, other, tol=1e-9):
        return (np.abs(self.rotation - other.rotation).max() <= tol
                and np.abs(self.translation - other.translation).max() <= tol)

    def __repr__(self):
        return f"RigidTransform(t={np.round(self.translation, 6).tolist()})"


def transform_point(t: RigidTransform, p):
    """``R p + r`` for a single point or an (N, 3) array."""
    return t.apply(p)


# --------------------------------------------------------------------------
# Shapes


class Shape:
    kind = "shape"

    def signed_distance_local(self, p):
        raise NotImplementedError

    def closest_point_local(self, p):
        raise NotImplementedError

    def ray_cast_local(self, origins, dirs):
        raise NotImplementedError

    def support_local(self, d):
        raise NotImplementedError

    def local_bounds(self):
        raise NotImplementedError

    def bounding_radius(self):
        lo, hi = self.local_bounds()
        return float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))

    def sorted_dims(self):
        lo, hi = self.local_bounds()
        return np.sort(hi - lo)[::-1]

    def contains_local(self, p, tol=0.0):
        return self.signed_distance_local(p) <= tol


@dataclass(frozen=True, eq=False)
class Box(Shape):
    """Box with full extents (w, d, h) along local x, y, z."""

    extents: tuple
    kind = "box"

    def __post_init__(self):
        e = tuple(float(v) for v in self.extents)
        if len(e) != 3 or min(e) <= 0:
            raise ValueError("box extents must be three positive lengths")
        object.__setattr__(self, "extents", e)

    @property
    def half(self):
        return 0.5 * np.asarray(self.extents)

    def signed_distance_local(self, p):
        q = np.abs(np.asarray(p, dtype=float)) - self.half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    def closest_point_local(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        half = self.half
        q = np.abs(p) - half
        out = np.clip(p, -half, half)
        inside = np.all(q <= 0, axis=1)
        if inside.any():
            k = np.argmax(q[inside], axis=1)
            rows = np.nonzero(inside)[0]
            sgn = np.where(p[rows, k] >= 0, 1.0, -1.0)
            out[rows, k] = sgn * half[k]
        return out

    def ray_cast_local(self, origins, dirs):
        o = np.atleast_2d(np.asarray(origins, dtype=float))
        d = np.atleast_2d(np.asarray(dirs, dtype=float))
        half = self.half
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-half - o) / d
            t2 = (half - o) / d
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        par = d == 0
        inside_slab = np.abs(o) <= half
        lo = np.where(par, np.where(inside_slab, -np.inf, np.inf), lo)
        hi = np.where(par, np.where(inside_slab, np.inf, -np.inf), hi)
        tnear = lo.max(axis=1)
        tfar = hi.min(axis=1)
        hit = (tnear <= tfar) & (tfar >= 0)
        t = np.where(tnear >= 0, tnear, tfar)
        return np.where(hit, t, np.inf)

    def support_local(self, d):
        return np.where(np.asarray(d) >= 0, 1.0, -1.0) * self.half

    def local_bounds(self):
        return -self.half, self.half.copy()

    def volume(self):
        w, d, h = self.extents
        return w * d * h

    def corners_local(self):
        s = np.array([[i, j, k] for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)], dtype=float)
        return s * self.half

    def to_mesh(self):
        v = self.corners_local()
        # corner index = 4*i + 2*j + k over (-1, 1) choices; faces wound outward
        f = np.array([
            [0, 1, 3], [0, 3, 2],  # -x
            [4, 6, 7], [4, 7, 5],  # +x
            [0, 4, 5], [0, 5, 1],  # -y
            [2, 3, 7], [2, 7, 6],  # +y
            [0, 2, 6], [0, 6, 4],  # -z
            [1, 5, 7], [1, 7, 3],  # +z
        ])
        return TriangleMesh(v, f)

    def sample_surface(self, n, rng):
        w, d, h = self.extents
        areas = np.array([d * h, d * h, w * h, w * h, w * d, w * d])
        face = rng.choice(6, size=n, p=areas / areas.sum())
        u = rng.uniform(-1.0, 1.0, size=(n, 3)) * self.half
        axis = face // 2
        sign = np.where(face % 2 == 0, -1.0, 1.0)
        u[np.arange(n), axis] = sign * self.half[axis]
        return u


@dataclass(frozen=True, eq=False)
class Cylinder(Shape):
    """Solid capped cylinder, axis along local z."""

    radius: float
    height: float
    kind = "cylinder"

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise ValueError("cylinder radius and height must be positive")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "height", float(self.height))

    def signed_distance_local(self, p):
        p = np.asarray(p, dtype=float)
        rho = np.hypot(p[..., 0], p[..., 1])
        dr = rho - self.radius
        dz = np.abs(p[..., 2]) - 0.5 * self.height
        inside = np.minimum(np.maximum(dr, dz), 0.0)
        outside = np.hypot(np.maximum(dr, 0.0), np.maximum(dz, 0.0))
        return inside + outside

    def closest_point_local(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        r, hh = self.radius, 0.5 * self.height
        rho = np.hypot(p[:, 0], p[:, 1])
        safe = np.where(rho > 0, rho, 1.0)
        ux = np.where(rho > 0, p[:, 0] / safe, 1.0)
        uy = np.where(rho > 0, p[:, 1] / safe, 0.0)
        z = p[:, 2]
        dr = rho - r
        dz = np.abs(z) - hh
        zs = np.where(z >= 0, hh, -hh)
        inside = (dr <= 0) & (dz <= 0)
        # outside: clamp radially and axially
        rc = np.minimum(rho, r)
        out = np.stack([rc * ux, rc * uy, np.clip(z, -hh, hh)], axis=1)
        # interior points project to the nearer of side or cap
        side = inside & (dr > dz)
        cap = inside & ~side
        out[side] = np.stack([r * ux[side], r * uy[side], z[side]], axis=1)
        out[cap, 2] = zs[cap]
        out[cap, 0] = p[cap, 0]
        out[cap, 1] = p[cap, 1]
        return out

    def ray_cast_local(self, origins, dirs):
        o = np.atleast_2d(np.asarray(origins, dtype=float))
        d = np.atleast_2d(np.asarray(dirs, dtype=float))
        r, hh = self.radius, 0.5 * self.height
        best = np.full(len(o), np.inf)
        a = d[:, 0] ** 2 + d[:, 1] ** 2
        b = 2.0 * (o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1])
        c = o[:, 0] ** 2 + o[:, 1] ** 2 - r * r
        disc = b * b - 4.0 * a * c
        ok = (a > 0) & (disc >= 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            sq = np.sqrt(np.where(ok, disc, 0.0))
            for sgn in (-1.0, 1.0):
                t = (-b + sgn * sq) / (2.0 * a)
                z = o[:, 2] + t * d[:, 2]
                valid = ok & (t >= 0) & (np.abs(z) <= hh)
                best = np.where(valid & (t < best), t, best)
            for zc in (-hh, hh):
                t = (zc - o[:, 2]) / d[:, 2]
                x = o[:, 0] + t * d[:, 0]
                y = o[:, 1] + t * d[:, 1]
                valid = (d[:, 2] != 0) & (t >= 0) & (x * x + y * y <= r * r)
                best = np.where(valid & (t < best), t, best)
        return best

    def support_local(self, d):
        d = np.asarray(d, dtype=float)
        n = math.hypot(d[0], d[1])
        radial = np.array([d[0], d[1]]) / n * self.radius if n > 0 else np.zeros(2)
        return np.array([radial[0], radial[1], (0.5 if d[2] >= 0 else -0.5) * self.height])

    def local_bounds(self):
        r, hh = self.radius, 0.5 * self.height
        return np.array([-r, -r, -hh]), np.array([r, r, hh])

    def volume(self):
        return math.pi * self.radius ** 2 * self.height

    def to_mesh(self, segments=48):
        ang = np.linspace(0.0, 2 * math.pi, segments, endpoint=False)
        hh = 0.5 * self.height
        ring = np.stack([self.radius * np.cos(ang), self.radius * np.sin(ang)], axis=1)
        bottom = np.column_stack([ring, np.full(segments, -hh)])
        top = np.column_stack([ring, np.full(segments, hh)])
        v = np.vstack([bottom, top, [[0, 0, -hh], [0, 0, hh]]])
        cb, ct = 2 * segments, 2 * segments + 1
        faces = []
        for i in range(segments):
            j = (i + 1) % segments
            faces += [[i, j, segments + j], [i, segments + j, segments + i],
                      [cb, j, i], [ct, segments + i, segments + j]]
        return TriangleMesh(v, np.array(faces))

    def sample_surface(self, n, rng):
        r, h = self.radius, self.height
        a_side, a_cap = 2 * math.pi * r * h, math.pi * r * r
        part = rng.choice(3, size=n, p=np.array([a_side, a_cap, a_cap]) / (a_side + 2 * a_cap))
        th = rng.uniform(0, 2 * math.pi, size=n)
        rad = np.where(part == 0, r, r * np.sqrt(rng.uniform(size=n)))
        z = np.where(part == 0, rng.uniform(-h / 2, h / 2, size=n), np.where(part == 1, -h / 2, h / 2))
        return np.column_stack([rad * np.cos(th), rad * np.sin(th), z])


class TriangleMesh(Shape):
    """Closed triangle mesh; ray queries go through a BVH."""

    kind = "mesh"

    def __init__(self, vertices, faces):
        self.vertices = _frozen(vertices)
        self.faces = _frozen(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3 or len(self.faces) == 0:
            raise ValueError("mesh needs (V, 3) vertices and at least one face")
        tri = self.vertices[self.faces]
        self._v0 = np.ascontiguousarray(tri[:, 0])
        self._e1 = np.ascontiguousarray(tri[:, 1] - tri[:, 0])
        self._e2 = np.ascontiguousarray(tri[:, 2] - tri[:, 0])
        self._bvh = None

    @property
    def bvh(self):
        if self._bvh is None:
            self._bvh = kernels.build_bvh(self._v0, self._v0 + self._e1, self._v0 + self._e2)
        return self._bvh

    def is_watertight(self):
        edges = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def ray_cast_local(self, origins, dirs):
        o = np.ascontiguousarray(np.atleast_2d(np.asarray(origins, dtype=float)))
        d = np.ascontiguousarray(np.atleast_2d(np.asarray(dirs, dtype=float)))
        return kernels.ray_mesh(o, d, self._v0, self._e1, self._e2, self.bvh)

    def _unsigned(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        best = np.full(len(p), np.inf)
        arg = np.zeros((len(p), 3))
        tri = self.vertices[self.faces]
        for start in range(0, len(tri), 256):
            chunk = tri[start:start + 256]
            cp = closest_point_on_triangles(p[:, None, :], chunk[None, :, 0], chunk[None, :, 1], chunk[None, :, 2])
            dist = np.linalg.norm(cp - p[:, None, :], axis=2)
            k = dist.argmin(axis=1)
            dk = dist[np.arange(len(p)), k]
            better = dk < best
            best = np.where(better, dk, best)
            arg[better] = cp[np.arange(len(p)), k][better]
        return best, arg

    def _inside(self, p):
        # ray parity along a fixed generic direction
        p = np.atleast_2d(np.asarray(p, dtype=float))
        d = np.array([0.5773, 0.5774, 0.5774012])
        d = d / np.linalg.norm(d)
        hits = kernels.ray_mesh_parity(np.ascontiguousarray(p), d, self._v0, self._e1, self._e2)
        return hits % 2 == 1

    def signed_distance_local(self, p):
        p = np.asarray(p, dtype=float)
        flat = np.atleast_2d(p)
        dist, _ = self._unsigned(flat)
        sd = np.where(self._inside(flat), -dist, dist)
        return sd.reshape(p.shape[:-1]) if p.ndim > 1 else sd[0]

    def closest_point_local(self, p):
        return self._unsigned(p)[1]

    def support_local(self, d):
        return self.vertices[np.argmax(self.vertices @ np.asarray(d, dtype=float))]

    def local_bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def sample_surface(self, n, rng):
        tri = self.vertices[self.faces]
        area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
        k = rng.choice(len(tri), size=n, p=area / area.sum())
        u, v = rng.uniform(size=(2, n))
        flip = u + v > 1
        u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
        t = tri[k]
        return t[:, 0] + u[:, None] * (t[:, 1] - t[:, 0]) + v[:, None] * (t[:, 2] - t[:, 0])


def closest_point_on_triangles(p, a, b, c):
    """Closest point on triangle abc to p (broadcasting; Ericson's regions)."""
    p, a, b, c = np.broadcast_arrays(p, a, b, c)
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("...i,...i", ab, ap)
    d2 = np.einsum("...i,...i", ac, ap)
    bp = p - b
    d3 = np.einsum("...i,...i", ab, bp)
    d4 = np.einsum("...i,...i", ac, bp)
    cp = p - c
    d5 = np.einsum("...i,...i", ab, cp)
    d6 = np.einsum("...i,...i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        res = a + ab * v[..., None] + ac * w[..., None]
        # edge bc
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        m = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
        res = np.where(m[..., None], b + (c - b) * w_bc[..., None], res)
        # edge ac
        w_ac = d2 / (d2 - d6)
        m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        res = np.where(m[..., None], a + ac * w_ac[..., None], res)
        # edge ab
        v_ab = d1 / (d1 - d3)
        m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        res = np.where(m[..., None], a + ab * v_ab[..., None], res)
    # vertex regions
    res = np.where(((d6 >= 0) & (d5 <= d6))[..., None], c, res)
    res = np.where(((d3 >= 0) & (d4 <= d3))[..., None], b, res)
    res = np.where(((d1 <= 0) & (d2 <= 0))[..., None], a, res)
    return res


# --------------------------------------------------------------------------
# Pose-aware queries


def signed_distance(shape: Shape, pose: RigidTransform, p):
    """Signed distance (negative inside) from world point(s) to a posed shape."""
    return shape.signed_distance_local(pose.inverse_apply(p))


def ray_cast(shape: Shape, pose: RigidTransform, origin, direction):
    """Smallest t >= 0 where the ray meets the surface, or ``None``."""
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ValueError("ray direction must be a unit vector")
    o_loc = pose.inverse_apply(np.asarray(origin, dtype=float))
    d_loc = d @ pose.rotation
    t = float(shape.ray_cast_local(o_loc[None], d_loc[None])[0])
    return None if not np.isfinite(t) else t


def ray_cast_many(shape, pose, origins, dirs):
    """Vectorized :func:`ray_cast`; misses are ``inf``."""
    return shape.ray_cast_local(pose.inverse_apply(origins), np.asarray(dirs, dtype=float) @ pose.rotation)


def support(shape, pose, d):
    d = np.asarray(d, dtype=float)
    return pose.apply(shape.support_local(d @ pose.rotation))


# --------------------------------------------------------------------------
# Bin


@dataclass(frozen=True, eq=False)
class BinBox:
    """Open-top storage box; bin frame origin at the center of the inner bottom."""

    extents: tuple = (0.30, 0.24, 0.08)
    wall: float = 0.01
    pose: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        e = tuple(float(v) for v in self.extents)
        if len(e) != 3 or min(e) <= 0 or self.wall <= 0:
            raise ValueError("bin extents and wall thickness must be positive")
        object.__setattr__(self, "extents", e)

    @property
    def interior_min(self):
        w, d, _ = self.extents
        return np.array([-w / 2, -d / 2, 0.0])

    @property
    def interior_max(self):
        w, d, h = self.extents
        return np.array([w / 2, d / 2, h])

    @property
    def bottom_center(self):
        return self.pose.translation.copy()

    def parts(self):
        """Floor slab and four walls as (Box, world pose) pairs."""
        w, d, h = self.extents
        t = self.wall
        W, D = w + 2 * t, d + 2 * t
        specs = [
            ((W, D, t), (0.0, 0.0, -t / 2)),
            ((t, D, h), (-(w + t) / 2, 0.0, h / 2)),
            ((t, D, h), ((w + t) / 2, 0.0, h / 2)),
            ((w, t, h), (0.0, -(d + t) / 2, h / 2)),
            ((w, t, h), (0.0, (d + t) / 2, h / 2)),
        ]
        return [(Box(ext), self.pose @ RigidTransform(np.eye(3), c)) for ext, c in specs]

    def to_bin_frame(self, points):
        return self.pose.inverse_apply(points)

    def inside_interior(self, points, tol=0.0):
        q = self.to_bin_frame(points)
        return np.all((q >= self.interior_min - tol) & (q <= self.interior_max + tol), axis=-1)


# --------------------------------------------------------------------------
# Shape catalog


def shape_from_dict(entry, base_dir=None):
    kind = entry.get("type")
    if kind == "box":
        dims = entry["dimensions"]
        ext = dims if isinstance(dims, (list, tuple)) else (dims["w"], dims["d"], dims["h"])
        return Box(tuple(ext))
    if kind == "cylinder":
        dims = entry["dimensions"]
        if isinstance(dims, (list, tuple)):
            return Cylinder(dims[0], dims[1])
        return Cylinder(dims["radius"], dims["height"])
    if kind == "mesh":
        from .plyio import read_mesh_ply

        path = Path(entry["mesh"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        v, f = read_mesh_ply(path)
        return TriangleMesh(v, f)
    raise ValueError(f"unknown shape type {kind!r}")


def shape_to_dict(name, shape, mesh_path=None):
    if isinstance(shape, Box):
        return {"name": name, "type": "box", "dimensions": list(shape.extents)}
    if isinstance(shape, Cylinder):
        return {"name": name, "type": "cylinder", "dimensions": {"radius": shape.radius, "height": shape.height}}
    if mesh_path is None:
        raise ValueError("mesh shapes need a mesh path to serialize")
    return {"name": name, "type": "mesh", "mesh": str(mesh_path)}


def load_catalog(path):
    """Read a shape catalog JSON (a list of entries or ``{"shapes": [...]}``)."""
    path = Path(path)
    data = json.loads(path.read_text())
    entries = data["shapes"] if isinstance(data, dict) else data
    return {e["name"]: shape_from_dict(e, base_dir=path.parent) for e in entries}


DEFAULT_CATALOG = {
    "cylinder": Cylinder(0.015, 0.080),
    "box": Box((0.030, 0.040, 0.090)),
}
