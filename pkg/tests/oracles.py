"""Brute-force reference implementations used only by the tests."""
import math

import numpy as np
from scipy.spatial.distance import cdist


def visible_by_sampling(blockers, origin, cell, starts, target, eps=1e-9):
    """Per start: does the segment to ``target`` leave through the open top without touching a blocker?

    Exact brute force: the segment is slab-tested against every blocker cell
    (shrunk by ``eps`` so pure edge grazing does not count) and its exit face
    from the grid box is found analytically.  The start cell is ignored.
    """
    dims = np.array(blockers.shape)
    lo = np.asarray(origin, float)
    hi = lo + dims * cell
    occ = np.argwhere(blockers)
    b_lo = lo + occ * cell + eps
    b_hi = lo + (occ + 1) * cell - eps
    target = np.asarray(target, float)
    out = np.zeros(len(starts), dtype=bool)
    for k, s in enumerate(starts):
        d = target - s
        # exit from the grid box
        with np.errstate(divide="ignore", invalid="ignore"):
            t_face = np.where(d > 0, (hi - s) / d, np.where(d < 0, (lo - s) / d, np.inf))
        axis = int(np.argmin(t_face))
        t_exit = t_face[axis]
        if t_exit >= 1.0 or not (axis == 2 and d[2] > 0):
            continue
        own = np.all(occ == np.floor((s - lo) / cell).astype(int), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (b_lo - s) / d
            t2 = (b_hi - s) / d
        t_near = np.where(d != 0, np.minimum(t1, t2), np.where((s >= b_lo) & (s <= b_hi), -np.inf, np.inf))
        t_far = np.where(d != 0, np.maximum(t1, t2), np.where((s >= b_lo) & (s <= b_hi), np.inf, -np.inf))
        enter = t_near.max(axis=1)
        leave = t_far.min(axis=1)
        hit = (enter <= leave) & (leave >= 0) & (enter <= t_exit) & ~own
        out[k] = not hit.any()
    return out


def merge_oracle(prev_points, prev_labels, current_points, min_distance, threshold):
    """Exhaustive near/far votes and merge bits per previous segment.

    Each current point votes for the segment of its nearest previous point;
    unlabelled previous points (label -1) swallow the vote.
    """
    n_seg = int(prev_labels.max()) + 1 if len(prev_labels) and prev_labels.max() >= 0 else 0
    near = np.zeros(n_seg, dtype=np.int64)
    far = np.zeros(n_seg, dtype=np.int64)
    if len(current_points) and len(prev_points):
        D = cdist(current_points, prev_points)
        j = D.argmin(axis=1)
        for k, jj in enumerate(j):
            seg = prev_labels[jj]
            if seg < 0:
                continue
            if D[k, jj] < min_distance:
                near[seg] += 1
            else:
                far[seg] += 1
    bits = np.array([n > 0 and f / n < threshold for n, f in zip(near, far)], dtype=bool)
    return near, far, bits


def feature_oracle(local_points, boxes, by, bz, wy, wz):
    """Point-by-point binning: first containing box, distance to its y faces, height above the sweep bottom."""
    bottom = max(b[1][2] for b in boxes)
    counts = np.zeros(by * bz, dtype=np.int64)
    for p in local_points:
        box = next((b for b in boxes if all(b[0][a] <= p[a] <= b[1][a] for a in range(3))), None)
        if box is None:
            raise AssertionError("point outside every box")
        d = min(p[1] - box[0][1], box[1][1] - p[1])
        h = bottom - p[2]
        jy = min(int(math.floor(d / wy)), by - 1)
        jz = min(int(math.floor(h / wz)), bz - 1)
        counts[jy * bz + jz] += 1
    return counts
