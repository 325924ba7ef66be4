"""Time each hot kernel under numba and under the numpy fallback.

Both variants are called directly, so one process covers both paths; the
environment flag only decides which one the package uses by default.

    python benchmarks/bench_kernels.py [--repeats 5] [--out kernels.csv]
"""
import argparse
import csv
import sys
import time

import numpy as np

from binpick import kernels
from binpick._accel import HAVE_NUMBA
from binpick.features import GripperModel, build_swept_volume
from binpick.geometry import RigidTransform, random_rotation


def _cases(rng):
    n = 40_000
    origins = np.tile([0.0, 0.0, 0.5], (n, 1))
    dirs = rng.normal(size=(n, 3)) * [0.2, 0.2, 0.0] + [0, 0, -1]
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    k = 12
    kinds = rng.integers(0, 2, k).astype(np.int64)
    rots = np.array([random_rotation(rng) for _ in range(k)])
    trans = rng.uniform(-0.1, 0.1, (k, 3)) * [1, 1, 0.2]
    params = np.tile([0.015, 0.04, 0.02], (k, 1))
    yield "ray_primitives", (origins, dirs, kinds, rots, trans, params)

    occ = (rng.random((20, 20, 10)) < 0.15).astype(np.bool_)
    starts = rng.uniform(0, 0.1, (4000, 3))
    yield "segments_blocked", (occ, np.zeros(3), 0.01, starts, np.array([0.05, 0.05, 0.6]))

    pts = rng.uniform(-0.1, 0.1, (8000, 3))
    svs = [build_swept_volume(RigidTransform(random_rotation(rng), rng.uniform(-0.05, 0.05, 3)), GripperModel(),
                              width=0.03) for _ in range(300)]
    boxes = np.array([s.boxes for s in svs])
    spheres = [s.bounding_sphere() for s in svs]
    yield "sweep_counts", (pts, np.zeros((1, len(pts)), np.bool_), np.full(len(svs), -1, np.int64),
                           np.array([s.frame.rotation for s in svs]), np.array([s.frame.translation for s in svs]),
                           boxes, np.array([s.bottom for s in svs]), np.array([c for c, _ in spheres]),
                           np.array([r for _, r in spheres]), 5, 5, 0.01, 0.01)

    X = rng.integers(0, 30, (150, 25)).astype(np.int64)
    y = (X[:, 3] + rng.integers(0, 10, 150) > 20).astype(np.int64)
    yield "best_split", (X, y, np.arange(25, dtype=np.int64))


def _time(fn, args, repeats):
    fn(*args)  # warm-up (and JIT compile)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--out")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path can be timed", file=sys.stderr)
    rng = np.random.default_rng(0)
    rows = []
    for name, call_args in _cases(rng):
        t_np = _time(getattr(kernels, f"{name}_numpy"), call_args, args.repeats)
        t_nb = _time(getattr(kernels, f"{name}_numba"), call_args, args.repeats) if HAVE_NUMBA else float("nan")
        rows.append((name, t_nb, t_np, t_np / t_nb))
    print(f"{'kernel':18s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, a, b, s in rows:
        print(f"{name:18s} {a:10.5f} {b:10.5f} {s:8.1f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kernel", "numba_seconds", "numpy_seconds", "speedup"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
