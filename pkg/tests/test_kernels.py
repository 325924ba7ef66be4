import os
import subprocess
import sys

import numpy as np
import pytest

from binpick import kernels
from binpick._accel import HAVE_NUMBA
from binpick.features import GripperModel, build_swept_volume
from binpick.geometry import RigidTransform, random_rotation

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _same(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        x, y = np.asarray(x), np.asarray(y)
        if x.dtype.kind == "f":
            assert np.allclose(x, y, rtol=0, atol=1e-12, equal_nan=True)
        else:
            assert np.array_equal(x, y)


def test_ray_primitives(rng):
    n, k = 3000, 10
    origins = np.tile([0.0, 0.0, 0.5], (n, 1))
    dirs = rng.normal(size=(n, 3)) * [0.2, 0.2, 0.0] + [0, 0, -1]
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    kinds = rng.integers(0, 2, k).astype(np.int64)
    rots = np.array([random_rotation(rng) for _ in range(k)])
    trans = rng.uniform(-0.1, 0.1, (k, 3)) * [1, 1, 0.2]
    params = np.tile([0.015, 0.04, 0.02], (k, 1))
    args = (origins, dirs, kinds, rots, trans, params)
    _same(kernels.ray_primitives_numba(*args), kernels.ray_primitives_numpy(*args))


def test_ray_mesh(rng):
    v = rng.uniform(-0.05, 0.05, (60, 3))
    f = rng.integers(0, 60, (80, 3))
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    e1, e2 = b - a, c - a
    bvh = kernels.build_bvh(a, b, c)
    origins = rng.uniform(-0.1, 0.1, (500, 3)) + [0, 0, 0.3]
    dirs = -origins + rng.normal(0, 0.02, origins.shape)
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    _same(kernels.ray_mesh_numba(origins, dirs, a, e1, e2, bvh), kernels.ray_mesh_numpy(origins, dirs, a, e1, e2, bvh))
    pts = rng.uniform(-0.06, 0.06, (300, 3))
    d = np.array([0.3, 0.5, 0.81])
    d /= np.linalg.norm(d)
    _same(kernels.ray_mesh_parity_numba(pts, d, a, e1, e2), kernels.ray_mesh_parity_numpy(pts, d, a, e1, e2))


def test_segments_blocked(rng):
    for _ in range(5):
        occ = rng.random((12, 10, 6)) < 0.2
        origin = rng.uniform(-0.01, 0.01, 3)
        starts = origin + rng.uniform(0, 1, (400, 3)) * [0.12, 0.10, 0.06]
        target = np.array([0.05, 0.04, 0.5]) + rng.normal(0, 0.1, 3)
        args = (occ, origin, 0.01, starts, target)
        _same(kernels.segments_blocked_numba(*args), kernels.segments_blocked_numpy(*args))


def test_sweep_counts(rng):
    pts = rng.uniform(-0.1, 0.1, (3000, 3))
    svs = [build_swept_volume(RigidTransform(random_rotation(rng), rng.uniform(-0.05, 0.05, 3)), GripperModel(),
                              width=rng.uniform(0, 0.06)) for _ in range(40)]
    exclude = rng.random((3, len(pts))) < 0.3
    groups = rng.integers(-1, 3, len(svs)).astype(np.int64)
    spheres = [s.bounding_sphere() for s in svs]
    args = (pts, exclude, groups, np.array([s.frame.rotation for s in svs]),
            np.array([s.frame.translation for s in svs]), np.array([s.boxes for s in svs]),
            np.array([s.bottom for s in svs]), np.array([c for c, _ in spheres]),
            np.array([r for _, r in spheres]) + 1e-9, 5, 5, 0.01, 0.01)
    _same(kernels.sweep_counts_numba(*args), kernels.sweep_counts_numpy(*args))


def test_best_split(rng):
    for _ in range(20):
        X = rng.integers(0, 8, (60, 25)).astype(np.int64)
        y = rng.integers(0, 2, 60).astype(np.int64)
        feats = np.sort(rng.choice(25, 5, replace=False)).astype(np.int64)
        _same(kernels.best_split_numba(X, y, feats), kernels.best_split_numpy(X, y, feats))


def test_env_flag_selects_numpy():
    code = "from binpick import kernels, USE_NUMBA; print(kernels.BACKEND, USE_NUMBA)"
    env = dict(os.environ, BINPICK_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout
    assert out.split() == ["numpy", "False"]
    env["BINPICK_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout
    assert out.split() == ["numba", "True"]
