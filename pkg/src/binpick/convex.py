"""Distance between convex posed shapes (GJK) and vectorized OBB overlap."""
import itertools

import numpy as np

from .geometry import support

_SUBSETS = {
    k: [s for r in range(1, k + 1) for s in itertools.combinations(range(k), r)]
    for k in range(1, 5)
}


def _closest_on_simplex(pts):
    """Min-norm point of conv(pts) for <= 4 points; returns (point, kept indices)."""
    best, best_sub = None, None
    for sub in _SUBSETS[len(pts)]:
        P = pts[list(sub)]
        if len(sub) == 1:
            v, lam = P[0], np.ones(1)
        else:
            E = P[1:] - P[0]
            G = E @ E.T
            if abs(np.linalg.det(G)) < 1e-30 * max(1.0, np.trace(G)) ** len(E):
                continue
            mu = np.linalg.solve(G, -E @ P[0])
            lam = np.concatenate([[1.0 - mu.sum()], mu])
            if lam.min() < -1e-12:
                continue
            v = P[0] + mu @ E
        n = v @ v
        if best is None or n < best @ best - 1e-30:
            best, best_sub = v, sub
    return best, list(best_sub)


def gjk_distance(support_a, support_b, max_iter=100, tol=1e-12):
    """Euclidean distance between two convex sets given by support maps.

    Returns 0.0 when they intersect.
    """
    def sup(d):
        return support_a(d) - support_b(-d)

    v = sup(np.array([1.0, 0.0, 0.0]))
    simplex = [v]
    for _ in range(max_iter):
        vv = v @ v
        if vv < 1e-24:
            return 0.0
        w = sup(-v)
        if vv - v @ w <= tol + 1e-10 * vv:
            return float(np.sqrt(vv))
        if any(np.allclose(w, s, atol=1e-15, rtol=0) for s in simplex):
            return float(np.sqrt(vv))
        simplex.append(w)
        v, keep = _closest_on_simplex(np.array(simplex))
        simplex = [simplex[i] for i in keep]
        if len(simplex) == 4:
            return 0.0
    return float(np.sqrt(v @ v))


def shape_distance(shape_a, pose_a, shape_b, pose_b):
    """Distance between two posed convex shapes (meshes use their hull)."""
    return gjk_distance(lambda d: support(shape_a, pose_a, d), lambda d: support(shape_b, pose_b, d))


def obb_support(center, rotation, half):
    center = np.asarray(center, dtype=float)
    rotation = np.asarray(rotation, dtype=float)
    half = np.asarray(half, dtype=float)

    def s(d):
        loc = d @ rotation
        return center + rotation @ (np.where(loc >= 0, 1.0, -1.0) * half)

    return s


def obb_overlap(c_a, R_a, h_a, c_b, R_b, h_b, eps=0.0):
    """Separating-axis test, vectorized over a leading batch axis.

    Boxes are given by center (..., 3), rotation (..., 3, 3) whose columns are
    the box axes, and half extents (..., 3).  Returns True where the boxes
    overlap by more than ``eps``.
    """
    c_a, R_a, h_a = (np.asarray(x, dtype=float) for x in (c_a, R_a, h_a))
    c_b, R_b, h_b = (np.asarray(x, dtype=float) for x in (c_b, R_b, h_b))
    axes = [R_a[..., :, i] for i in range(3)] + [R_b[..., :, i] for i in range(3)]
    for i in range(3):
        for j in range(3):
            axes.append(np.cross(R_a[..., :, i], R_b[..., :, j]))
    t = c_b - c_a
    sep = np.zeros(np.broadcast(t[..., 0], R_a[..., 0, 0], R_b[..., 0, 0]).shape, dtype=bool)
    for ax in axes:
        norm = np.linalg.norm(ax, axis=-1)
        ok = norm > 1e-9
        axn = ax / np.where(ok, norm, 1.0)[..., None]
        ra = np.sum(np.abs(np.einsum("...ki,...k->...i", R_a, axn)) * h_a, axis=-1)
        rb = np.sum(np.abs(np.einsum("...ki,...k->...i", R_b, axn)) * h_b, axis=-1)
        dist = np.abs(np.sum(t * axn, axis=-1))
        sep |= ok & (dist > ra + rb - eps)
    return ~sep
