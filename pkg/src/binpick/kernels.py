"""Hot inner loops, each in a numba flavour and a pure-numpy flavour.

The public name (``ray_primitives``, ``segments_blocked``, ...) is bound at
import time to the numba variant unless ``BINPICK_DISABLE_NUMBA`` is set.
Both variants are always importable under ``<name>_numba`` / ``<name>_numpy``
so tests and the benchmark can compare them directly.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

BOX, CYLINDER = 0, 1


# ==========================================================================
# Ray vs. analytic primitives (boxes and capped cylinders)


@njit
def _ray_box_scalar(ox, oy, oz, dx, dy, dz, hx, hy, hz):
    tnear = -np.inf
    tfar = np.inf
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    h = (hx, hy, hz)
    for a in range(3):
        if d[a] == 0.0:
            if abs(o[a]) > h[a]:
                return np.inf
            continue
        t1 = (-h[a] - o[a]) / d[a]
        t2 = (h[a] - o[a]) / d[a]
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > tnear:
            tnear = t1
        if t2 < tfar:
            tfar = t2
    if tnear > tfar or tfar < 0.0:
        return np.inf
    return tnear if tnear >= 0.0 else tfar


@njit
def _ray_cyl_scalar(ox, oy, oz, dx, dy, dz, r, hh):
    best = np.inf
    a = dx * dx + dy * dy
    if a > 0.0:
        b = 2.0 * (ox * dx + oy * dy)
        c = ox * ox + oy * oy - r * r
        disc = b * b - 4.0 * a * c
        if disc >= 0.0:
            sq = math.sqrt(disc)
            for sgn in (-1.0, 1.0):
                t = (-b + sgn * sq) / (2.0 * a)
                if t >= 0.0 and abs(oz + t * dz) <= hh and t < best:
                    best = t
    if dz != 0.0:
        for zc in (-hh, hh):
            t = (zc - oz) / dz
            if t >= 0.0:
                x = ox + t * dx
                y = oy + t * dy
                if x * x + y * y <= r * r and t < best:
                    best = t
    return best


@njit
def ray_primitives_numba(origins, dirs, kinds, rots, trans, params):
    n = origins.shape[0]
    m = kinds.shape[0]
    tbest = np.full(n, np.inf)
    which = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for k in range(m):
            px = origins[i, 0] - trans[k, 0]
            py = origins[i, 1] - trans[k, 1]
            pz = origins[i, 2] - trans[k, 2]
            R = rots[k]
            ox = R[0, 0] * px + R[1, 0] * py + R[2, 0] * pz
            oy = R[0, 1] * px + R[1, 1] * py + R[2, 1] * pz
            oz = R[0, 2] * px + R[1, 2] * py + R[2, 2] * pz
            dx = R[0, 0] * dirs[i, 0] + R[1, 0] * dirs[i, 1] + R[2, 0] * dirs[i, 2]
            dy = R[0, 1] * dirs[i, 0] + R[1, 1] * dirs[i, 1] + R[2, 1] * dirs[i, 2]
            dz = R[0, 2] * dirs[i, 0] + R[1, 2] * dirs[i, 1] + R[2, 2] * dirs[i, 2]
            if kinds[k] == 0:
                t = _ray_box_scalar(ox, oy, oz, dx, dy, dz, params[k, 0], params[k, 1], params[k, 2])
            else:
                t = _ray_cyl_scalar(ox, oy, oz, dx, dy, dz, params[k, 0], params[k, 1])
            if t < tbest[i]:
                tbest[i] = t
                which[i] = k
    return tbest, which


def ray_primitives_numpy(origins, dirs, kinds, rots, trans, params):
    from .geometry import Box, Cylinder

    n = origins.shape[0]
    tbest = np.full(n, np.inf)
    which = np.full(n, -1, dtype=np.int64)
    for k in range(kinds.shape[0]):
        o = (origins - trans[k]) @ rots[k]
        d = dirs @ rots[k]
        if kinds[k] == BOX:
            shape = Box(tuple(2.0 * params[k]))
        else:
            shape = Cylinder(params[k, 0], 2.0 * params[k, 1])
        t = shape.ray_cast_local(o, d)
        better = t < tbest
        tbest = np.where(better, t, tbest)
        which = np.where(better, k, which)
    return tbest, which


# ==========================================================================
# Triangle meshes: BVH construction (python) and traversal


def build_bvh(a, b, c, leaf_size=4):
    """Median-split BVH over triangles (a, b, c are (T, 3) vertex arrays)."""
    lo_t = np.minimum(np.minimum(a, b), c)
    hi_t = np.maximum(np.maximum(a, b), c)
    cent = (lo_t + hi_t) * 0.5
    order = np.arange(len(a))
    nodes_min, nodes_max, left, right, start, count = [], [], [], [], [], []

    def build(idx_lo, idx_hi):
        node = len(nodes_min)
        ids = order[idx_lo:idx_hi]
        nodes_min.append(lo_t[ids].min(axis=0))
        nodes_max.append(hi_t[ids].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(idx_lo)
        count.append(0)
        n = idx_hi - idx_lo
        if n <= leaf_size:
            count[node] = n
            return node
        axis = int(np.argmax(cent[ids].max(axis=0) - cent[ids].min(axis=0)))
        srt = ids[np.argsort(cent[ids, axis], kind="mergesort")]
        order[idx_lo:idx_hi] = srt
        mid = idx_lo + n // 2
        left[node] = build(idx_lo, mid)
        right[node] = build(mid, idx_hi)
        return node

    build(0, len(a))
    return (np.array(nodes_min), np.array(nodes_max), np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64), np.array(start, dtype=np.int64),
            np.array(count, dtype=np.int64), order.astype(np.int64))


@njit
def _moller_trumbore(ox, oy, oz, dx, dy, dz, v0, e1, e2):
    px = dy * e2[2] - dz * e2[1]
    py = dz * e2[0] - dx * e2[2]
    pz = dx * e2[1] - dy * e2[0]
    det = e1[0] * px + e1[1] * py + e1[2] * pz
    if abs(det) < 1e-300:
        return np.inf
    inv = 1.0 / det
    tx, ty, tz = ox - v0[0], oy - v0[1], oz - v0[2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return np.inf
    qx = ty * e1[2] - tz * e1[1]
    qy = tz * e1[0] - tx * e1[2]
    qz = tx * e1[1] - ty * e1[0]
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return np.inf
    return (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv


@njit
def _ray_mesh_bvh_numba(origins, dirs, v0, e1, e2, nmin, nmax, left, right, start, count, order):
    n = origins.shape[0]
    out = np.full(n, np.inf)
    stack = np.empty(128, dtype=np.int64)
    for i in range(n):
        ox, oy, oz = origins[i, 0], origins[i, 1], origins[i, 2]
        dx, dy, dz = dirs[i, 0], dirs[i, 1], dirs[i, 2]
        best = np.inf
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            tnear = -np.inf
            tfar = best
            miss = False
            for a in range(3):
                o = origins[i, a]
                d = dirs[i, a]
                if d == 0.0:
                    if o < nmin[node, a] or o > nmax[node, a]:
                        miss = True
                        break
                    continue
                t1 = (nmin[node, a] - o) / d
                t2 = (nmax[node, a] - o) / d
                if t1 > t2:
                    t1, t2 = t2, t1
                tnear = max(tnear, t1)
                tfar = min(tfar, t2)
            if miss or tnear > tfar or tfar < 0.0:
                continue
            if count[node] > 0:
                for j in range(start[node], start[node] + count[node]):
                    k = order[j]
                    t = _moller_trumbore(ox, oy, oz, dx, dy, dz, v0[k], e1[k], e2[k])
                    if t >= 0.0 and t < best:
                        best = t
            else:
                stack[sp] = left[node]
                sp += 1
                stack[sp] = right[node]
                sp += 1
        out[i] = best
    return out


def ray_mesh_numba(origins, dirs, v0, e1, e2, bvh):
    return _ray_mesh_bvh_numba(origins, dirs, v0, e1, e2, *bvh)


def _mt_numpy(o, d, v0, e1, e2):
    """Brute-force Moller-Trumbore, rays (N,) x triangles (T,) -> t (N, T)."""
    p = np.cross(d[:, None, :], e2[None])
    det = np.einsum("tk,ntk->nt", e1, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        tv = o[:, None, :] - v0[None]
        u = np.einsum("ntk,ntk->nt", tv, p) * inv
        q = np.cross(tv, e1[None])
        v = np.einsum("nk,ntk->nt", d, q) * inv
        t = np.einsum("tk,ntk->nt", e2, q) * inv
    ok = (np.abs(det) >= 1e-300) & (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1)
    return np.where(ok, t, np.inf)


def ray_mesh_numpy(origins, dirs, v0, e1, e2, bvh=None):
    out = np.full(len(origins), np.inf)
    step = max(1, 200000 // max(1, len(v0)))
    for s in range(0, len(origins), step):
        t = _mt_numpy(origins[s:s + step], dirs[s:s + step], v0, e1, e2)
        t = np.where(t >= 0, t, np.inf)
        out[s:s + step] = t.min(axis=1)
    return out


@njit
def ray_mesh_parity_numba(points, d, v0, e1, e2):
    n = points.shape[0]
    hits = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for k in range(v0.shape[0]):
            t = _moller_trumbore(points[i, 0], points[i, 1], points[i, 2], d[0], d[1], d[2], v0[k], e1[k], e2[k])
            if t > 0.0 and t < np.inf:
                hits[i] += 1
    return hits


def ray_mesh_parity_numpy(points, d, v0, e1, e2):
    hits = np.zeros(len(points), dtype=np.int64)
    dd = np.broadcast_to(d, points.shape)
    step = max(1, 200000 // max(1, len(v0)))
    for s in range(0, len(points), step):
        t = _mt_numpy(points[s:s + step], np.ascontiguousarray(dd[s:s + step]), v0, e1, e2)
        hits[s:s + step] = np.sum((t > 0) & np.isfinite(t), axis=1)
    return hits


# ==========================================================================
# Occupancy-grid line of sight
#
# A segment from a cell center toward a viewpoint is blocked if it passes
# through an occupied cell (the start cell excluded) or leaves the grid
# anywhere but through the open top face (bin walls and floor).


@njit
def segments_blocked_numba(occ, origin, cell, starts, target):
    nx, ny, nz = occ.shape
    dims = (nx, ny, nz)
    m = starts.shape[0]
    blocked = np.zeros(m, dtype=np.bool_)
    for i in range(m):
        s = (starts[i, 0], starts[i, 1], starts[i, 2])
        d = (target[0] - s[0], target[1] - s[1], target[2] - s[2])
        u_exit = np.inf
        exit_axis = -1
        for a in range(3):
            if d[a] > 0.0:
                u = (origin[a] + dims[a] * cell - s[a]) / d[a]
            elif d[a] < 0.0:
                u = (origin[a] - s[a]) / d[a]
            else:
                continue
            if u < u_exit:
                u_exit = u
                exit_axis = a
        if u_exit < 1.0 and not (exit_axis == 2 and d[2] > 0.0):
            blocked[i] = True
            continue
        u_end = min(u_exit, 1.0)
        idx = [0, 0, 0]
        step = [0, 0, 0]
        tmax = [np.inf, np.inf, np.inf]
        tdelta = [np.inf, np.inf, np.inf]
        for a in range(3):
            c = int(math.floor((s[a] - origin[a]) / cell))
            c = min(max(c, 0), dims[a] - 1)
            idx[a] = c
            if d[a] > 0.0:
                step[a] = 1
                tmax[a] = (origin[a] + (c + 1) * cell - s[a]) / d[a]
                tdelta[a] = cell / d[a]
            elif d[a] < 0.0:
                step[a] = -1
                tmax[a] = (origin[a] + c * cell - s[a]) / d[a]
                tdelta[a] = -cell / d[a]
        while True:
            a = 0
            if tmax[1] < tmax[a]:
                a = 1
            if tmax[2] < tmax[a]:
                a = 2
            if tmax[a] > u_end:
                break
            idx[a] += step[a]
            if idx[a] < 0 or idx[a] >= dims[a]:
                break
            tmax[a] += tdelta[a]
            if occ[idx[0], idx[1], idx[2]]:
                blocked[i] = True
                break
    return blocked


def segments_blocked_numpy(occ, origin, cell, starts, target):
    dims = np.array(occ.shape)
    s = np.asarray(starts, dtype=float)
    d = np.asarray(target, dtype=float)[None, :] - s
    hi = origin + dims * cell
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(d > 0, (hi - s) / d, np.where(d < 0, (origin - s) / d, np.inf))
    exit_axis = np.argmin(u, axis=1)
    u_exit = u[np.arange(len(s)), exit_axis]
    wall = (u_exit < 1.0) & ~((exit_axis == 2) & (d[:, 2] > 0))
    blocked = wall.copy()
    u_end = np.minimum(u_exit, 1.0)
    idx = np.clip(np.floor((s - origin) / cell).astype(np.int64), 0, dims - 1)
    step = np.sign(d).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        nxt = origin + (idx + (step > 0)) * cell
        tmax = np.where(d != 0, (nxt - s) / d, np.inf)
        tdelta = np.where(d != 0, cell / np.abs(d), np.inf)
    active = ~wall
    rows = np.arange(len(s))
    while active.any():
        a = np.argmin(tmax, axis=1)
        ta = tmax[rows, a]
        active &= ta <= u_end
        if not active.any():
            break
        r = rows[active]
        ar = a[active]
        idx[r, ar] += step[r, ar]
        inside = (idx[r, ar] >= 0) & (idx[r, ar] < dims[ar])
        active[r[~inside]] = False
        r, ar = r[inside], ar[inside]
        tmax[r, ar] += tdelta[r, ar]
        hit = occ[idx[r, 0], idx[r, 1], idx[r, 2]]
        blocked[r[hit]] = True
        active[r[hit]] = False
    return blocked


# ==========================================================================
# Per-candidate binned point counts inside finger swept volumes


@njit
def sweep_counts_numba(points, exclude, groups, rots, trans, boxes, bottoms, centers, radii, by, bz, wy, wz):
    c_n = rots.shape[0]
    n = points.shape[0]
    nb = boxes.shape[1]
    counts = np.zeros((c_n, by * bz), dtype=np.int64)
    for c in range(c_n):
        g = groups[c]
        R = rots[c]
        r2 = radii[c] * radii[c]
        for i in range(n):
            if g >= 0 and exclude[g, i]:
                continue
            px = points[i, 0] - trans[c, 0]
            py = points[i, 1] - trans[c, 1]
            pz = points[i, 2] - trans[c, 2]
            qx = points[i, 0] - centers[c, 0]
            qy = points[i, 1] - centers[c, 1]
            qz = points[i, 2] - centers[c, 2]
            if qx * qx + qy * qy + qz * qz > r2:
                continue
            lx = R[0, 0] * px + R[1, 0] * py + R[2, 0] * pz
            ly = R[0, 1] * px + R[1, 1] * py + R[2, 1] * pz
            lz = R[0, 2] * px + R[1, 2] * py + R[2, 2] * pz
            for b in range(nb):
                if (boxes[c, b, 0, 0] <= lx <= boxes[c, b, 1, 0]
                        and boxes[c, b, 0, 1] <= ly <= boxes[c, b, 1, 1]
                        and boxes[c, b, 0, 2] <= lz <= boxes[c, b, 1, 2]):
                    d = min(ly - boxes[c, b, 0, 1], boxes[c, b, 1, 1] - ly)
                    h = bottoms[c] - lz
                    jy = min(int(math.floor(d / wy)), by - 1)
                    jz = min(int(math.floor(h / wz)), bz - 1)
                    counts[c, jy * bz + jz] += 1
                    break
    return counts


def sweep_counts_numpy(points, exclude, groups, rots, trans, boxes, bottoms, centers, radii, by, bz, wy, wz):
    c_n = rots.shape[0]
    counts = np.zeros((c_n, by * bz), dtype=np.int64)
    for c in range(c_n):
        keep = np.sum((points - centers[c]) ** 2, axis=1) <= radii[c] ** 2
        if groups[c] >= 0:
            keep &= ~exclude[groups[c]]
        loc = (points[keep] - trans[c]) @ rots[c]
        if len(loc) == 0:
            continue
        box_idx = np.full(len(loc), -1)
        for b in range(boxes.shape[1] - 1, -1, -1):
            inside = np.all((loc >= boxes[c, b, 0]) & (loc <= boxes[c, b, 1]), axis=1)
            box_idx[inside] = b
        ok = box_idx >= 0
        if not ok.any():
            continue
        loc, bi = loc[ok], box_idx[ok]
        d = np.minimum(loc[:, 1] - boxes[c, bi, 0, 1], boxes[c, bi, 1, 1] - loc[:, 1])
        h = bottoms[c] - loc[:, 2]
        jy = np.minimum(np.floor(d / wy).astype(np.int64), by - 1)
        jz = np.minimum(np.floor(h / wz).astype(np.int64), bz - 1)
        counts[c] = np.bincount(jy * bz + jz, minlength=by * bz)
    return counts


# ==========================================================================
# Exhaustive Gini split search for one tree node


@njit
def best_split_numba(X, y, features):
    n = X.shape[0]
    best_g = np.inf
    best_f = -1
    best_t = 0.0
    total_pos = 0
    for i in range(n):
        total_pos += y[i]
    for fi in range(features.shape[0]):
        f = features[fi]
        col = X[:, f].copy()
        order = np.argsort(col, kind="mergesort")
        pos_l = 0
        for k in range(n - 1):
            pos_l += y[order[k]]
            v0 = col[order[k]]
            v1 = col[order[k + 1]]
            if v0 == v1:
                continue
            n_l = k + 1
            n_r = n - n_l
            pos_r = total_pos - pos_l
            g = (2.0 * pos_l * (n_l - pos_l) / n_l + 2.0 * pos_r * (n_r - pos_r) / n_r) / n
            if g < best_g:
                best_g = g
                best_f = f
                best_t = 0.5 * (v0 + v1)
    return best_f, best_t, best_g


def best_split_numpy(X, y, features):
    n = X.shape[0]
    total_pos = int(y.sum())
    best = (-1, 0.0, np.inf)
    for f in features:
        col = X[:, f]
        order = np.argsort(col, kind="mergesort")
        v = col[order]
        pos_l = np.cumsum(y[order])[:-1]
        change = v[:-1] != v[1:]
        if not change.any():
            continue
        n_l = np.arange(1, n)
        n_r = n - n_l
        pos_r = total_pos - pos_l
        g = (2.0 * pos_l * (n_l - pos_l) / n_l + 2.0 * pos_r * (n_r - pos_r) / n_r) / n
        g = np.where(change, g, np.inf)
        k = int(np.argmin(g))
        if g[k] < best[2]:
            best = (int(f), 0.5 * (v[k] + v[k + 1]), float(g[k]))
    return best


# ==========================================================================
# Dispatch

if USE_NUMBA:
    ray_primitives = ray_primitives_numba
    ray_mesh = ray_mesh_numba
    ray_mesh_parity = ray_mesh_parity_numba
    segments_blocked = segments_blocked_numba
    sweep_counts = sweep_counts_numba
    best_split = best_split_numba
else:
    ray_primitives = ray_primitives_numpy
    ray_mesh = ray_mesh_numpy
    ray_mesh_parity = ray_mesh_parity_numpy
    segments_blocked = segments_blocked_numpy
    sweep_counts = sweep_counts_numpy
    best_split = best_split_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
