"""``binpick`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import glob
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import features, forest, fusion, occupancy, pipeline, scene, sensing
from .config import RunConfig, load_config
from .errors import BinpickError, ConfigError
from .geometry import BinBox, load_catalog
from .plyio import read_cloud_ply, write_cloud_ply

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _emit(msg):
    print(msg, flush=True)


def _config(args, **overrides):
    cfg = load_config(getattr(args, "config", None))
    cli = {"threads": getattr(args, "threads", None)}
    cli.update(overrides)
    return cfg.with_overrides(cli)


def _catalog(cfg: RunConfig):
    return load_catalog(cfg.scene.catalog) if cfg.scene.catalog else None


def _candidates(sc, cfg: RunConfig):
    """All polyhedron poses and the reachable subset (same objects)."""
    allc = sensing.candidate_poses(sc.bin, cfg.sensor.faces, tuple(cfg.sensor.standoffs))
    reach = sensing.ReachabilityModel()
    return allc, [c for c in allc if sensing.reachable(c, reach, sc.bin.bottom_center)]


# --------------------------------------------------------------------------
# commands


def cmd_gen_scene(args):
    cfg = _config(args, **{"scene.count": args.count, "seeds.scene": args.seed})
    sc = scene.generate_scene(cfg.scene_config(), cfg.seeds.scene, _catalog(cfg))
    scene.save_scene(args.out, sc)
    n_trav = sum(o.traversable for o in sc.objects)
    _emit(f"wrote {args.out}: {len(sc)} objects, {n_trav} traversable")


def cmd_capture(args):
    cfg = _config(args)
    sc = scene.load_scene(args.scene)
    cands = sensing.candidate_poses(sc.bin, cfg.sensor.faces, tuple(cfg.sensor.standoffs))
    if not 0 <= args.pose_index < len(cands):
        raise ConfigError(f"pose index must lie in [0, {len(cands) - 1}]")
    cloud = sensing.capture(sc, cfg.sensor_model(), cands[args.pose_index], seed=args.seed, threads=cfg.threads)
    if args.strip_bin:
        cloud = sensing.strip_bin_points(cloud, sc.bin)
    write_cloud_ply(args.out, cloud)
    _emit(f"wrote {args.out}: {len(cloud)} points")


def cmd_plan_view(args):
    cfg = _config(args)
    sc = scene.load_scene(args.scene)
    allc, cands = _candidates(sc, cfg)
    sensor = cfg.sensor_model()
    used = [int(i) for i in args.used.split(",")] if args.used else []
    if any(not 0 <= i < len(allc) for i in used):
        raise ConfigError(f"used pose indices must lie in [0, {len(allc) - 1}]")
    if not used:
        grid = occupancy.OccupancyGrid.for_bin(sc.bin, cfg.cell)
        pose = occupancy.select_view_first(grid, cands, sensor)
        score = None
    else:
        if args.cloud:
            cloud = read_cloud_ply(args.cloud)
        else:
            parts = [sensing.capture(sc, sensor, allc[i], seed=k) for k, i in enumerate(used)]
            cloud = type(parts[0])(np.vstack([p.points for p in parts]))
        grid = occupancy.build_grid(sc.bin, sensing.strip_bin_points(cloud, sc.bin), [allc[i] for i in used],
                                    cfg.cell, sensor)
        pose, score = occupancy.select_view_next(grid, cands, sensor, return_score=True)
        if args.grid_out:
            occupancy.save_grid_csv(args.grid_out, grid)
    index = next(k for k, c in enumerate(allc) if c is pose)
    out = {"pose_index": index, "face_index": pose.face_index, "standoff": pose.standoff,
           "position": pose.position.tolist(), "score": score}
    _emit(json.dumps(out))


def cmd_detect(args):
    cfg = _config(args)
    cloud = read_cloud_ply(args.cloud)
    prev = fusion.load_estimates(args.prev) if args.prev and Path(args.prev).exists() else []
    catalog = _catalog(cfg)
    sc_bin = BinBox(tuple(cfg.scene.bin_extents), cfg.scene.wall)
    refs = tuple(args.shapes.split(",")) if args.shapes else tuple(cfg.scene.parts)
    ests, stats = fusion.detect_all(sensing.strip_bin_points(cloud, sc_bin), prev, parallelism=cfg.threads,
                                    shape_refs=refs, catalog=catalog, bin_box=sc_bin,
                                    config=fusion.DetectConfig(parallelism=cfg.threads), return_stats=True)
    if args.out:
        fusion.save_estimates(args.out, ests)
    _emit(f"{len(ests)} estimates ({stats['icp']} fitted, {stats['reused']} reused) from {stats['segments']} segments")


def cmd_collect(args):
    cfg = _config(args)
    rows = pipeline.collect_training(args.n_trials, cfg.scene_config(), cfg.pipeline_config(),
                                     seed=cfg.seeds.collect if args.seed is None else args.seed,
                                     trials_per_scene=args.trials_per_scene, catalog=_catalog(cfg))
    n = cfg.features.b_y * cfg.features.b_z
    features.write_feature_csv(args.out, rows, n)
    pos = sum(1 for _, y in rows if y)
    _emit(f"wrote {args.out}: {len(rows)} rows, {pos} success / {len(rows) - pos} failure")
    if rows and (pos == 0 or pos == len(rows)):
        _emit("warning: only one class present")


def _training_set(path, cfg):
    X, y = features.read_feature_csv(path)
    return forest.TrainingSet(X, y, cfg.bins)


def cmd_train(args):
    cfg = _config(args)
    data = _training_set(args.data, cfg)
    model = forest.train(data, seed=cfg.seeds.forest if args.seed is None else args.seed, **cfg.forest_kwargs())
    forest.save_forest(args.out, model)
    _emit(f"wrote {args.out}: {len(model.trees)} trees from {len(data)} rows")


def cmd_eval(args):
    cfg = _config(args)
    model = forest.load_forest(args.model)
    data = _training_set(args.data, cfg)
    p = model.predict_proba(data.X)
    pred = p >= 0.5
    truth = data.y == 1
    m = pipeline.metrics_from_counts(int(np.sum(pred & truth)), int(np.sum(pred & ~truth)),
                                     int(np.sum(~pred & truth)), int(np.sum(~pred & ~truth)))
    acc = float(np.mean(pred == truth)) if len(truth) else None
    _emit(json.dumps({"accuracy": acc, "precision": m.precision, "recall": m.recall, "f_value": m.f_value,
                      "tp": m.tp, "fp": m.fp, "fn": m.fn, "tn": m.tn}))


def cmd_learning_curve(args):
    cfg = _config(args)
    pool = _training_set(args.data, cfg)
    holdout = _training_set(args.holdout, cfg)
    if len(pool) < 2 or len(holdout) < 1:
        raise BinpickError("learning curve needs a training pool and a held-out set")
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else list(range(10, len(pool) + 1, 10))
    kw = cfg.forest_kwargs()
    curve = forest.accuracy_curve(pool, sizes, holdout, repeats=args.repeats, seed=cfg.seeds.curve, **kw)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["size", "accuracy"])
        for size, acc in curve:
            w.writerow([size, f"{acc:.6f}"])
    acc = dict(curve)
    for size, a in curve:
        _emit(f"{size:5d}  {a:.4f}")
    if 50 in acc and max(acc) > 50:
        delta = acc[max(acc)] - acc[50]
        verdict = "saturated" if abs(delta) < 0.05 else "not saturated"
        _emit(f"plateau: accuracy({max(acc)}) - accuracy(50) = {delta:+.4f} -> {verdict}")


def _episode_config(args, cfg):
    over = {}
    if args.views is not None:
        over["max_views"] = args.views
    if args.alpha is not None:
        over["alpha"] = args.alpha
    return cfg.pipeline_config(**over)


def cmd_run_episode(args):
    cfg = _config(args)
    sc = scene.load_scene(args.scene)
    model = forest.load_forest(args.model)
    pc = _episode_config(args, cfg)
    recs = pipeline.run_episode(sc, model, pc, seed=args.seed, max_trials=args.max_trials)
    pipeline.save_records(args.out, recs)
    m = pipeline.compute_metrics(recs)
    _emit(f"wrote {args.out}: {len(recs)} trials, {sum(bool(r.success) for r in recs)} picked, "
          f"F={_fmt(m.f_value)}")


def _fmt(v):
    return "n/a" if v is None else f"{v:.4f}"


def cmd_evaluate(args):
    paths = sorted({p for pat in args.records for p in glob.glob(pat)})
    if not paths:
        raise BinpickError("no record files matched")
    recs = [r for p in paths for r in pipeline.load_records(p)]
    m = pipeline.compute_metrics(recs)
    rows = [("files", len(paths)), ("trials", len(recs)), ("tp", m.tp), ("fp", m.fp), ("fn", m.fn), ("tn", m.tn),
            ("precision", m.precision), ("recall", m.recall), ("f_value", m.f_value)]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["metric", "value"])
        for k, v in rows:
            w.writerow([k, "" if v is None else (f"{v:.6f}" if isinstance(v, float) else v)])
    finally:
        if args.out:
            out.close()


def cmd_bench_detect(args):
    cfg = _config(args)
    threads = [int(t) for t in args.threads_list.split(",")]
    counts = list(range(1, args.max_objects + 1))
    scene_cfg = replace(cfg.scene_config(), min_clearance=args.clearance,
                        max_gap=max(cfg.scene_config().max_gap, args.clearance + 0.012))
    rows = []
    for n in counts:
        for t in threads:
            sec, found = pipeline.time_detection(n, t, seed=args.seed, repeats=args.repeats,
                                                 scene_config=scene_cfg, sensor=cfg.sensor_model())
            rows.append((n, t, sec))
            _emit(f"objects={n} threads={t} seconds={sec:.4f} detected={found}")
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["objects", "threads", "seconds"])
        for n, t, sec in rows:
            w.writerow([n, t, f"{sec:.6f}"])
    trend = detect_trend(rows)
    _emit(f"non-increasing in threads: {trend['threads']}; increasing in objects: {trend['objects']}")


def detect_trend(rows):
    """Check the timing table trends: per object count across threads, per thread count across objects."""
    by_n, by_t = {}, {}
    for n, t, sec in rows:
        by_n.setdefault(n, []).append((t, sec))
        by_t.setdefault(t, []).append((n, sec))
    thr = all(b[1] <= a[1] for v in by_n.values() for a, b in zip(sorted(v), sorted(v)[1:]))
    obj = all(b[1] > a[1] for v in by_t.values() for a, b in zip(sorted(v), sorted(v)[1:]))
    return {"threads": thr, "objects": obj}


# --------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="binpick", description="Simulated learning-based bin picking.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--threads", type=int, help="worker threads (capped by BINPICK_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-scene", parents=[common], help="generate a random scene")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--count", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_scene)

    s = sub.add_parser("capture", parents=[common], help="ray-cast one depth capture to PLY")
    s.add_argument("--scene", required=True)
    s.add_argument("--pose-index", type=int, default=0)
    s.add_argument("--seed", type=int, default=0, help="noise seed")
    s.add_argument("--strip-bin", action="store_true", help="drop floor and wall points")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_capture)

    s = sub.add_parser("plan-view", parents=[common], help="choose the next sensor pose")
    s.add_argument("--scene", required=True)
    s.add_argument("--used", help="comma-separated pose indices already captured")
    s.add_argument("--cloud", help="merged cloud for the used poses (captured on the fly if omitted)")
    s.add_argument("--grid-out", help="write the occupancy grid as CSV")
    s.set_defaults(func=cmd_plan_view)

    s = sub.add_parser("detect", parents=[common], help="segment a cloud and estimate poses")
    s.add_argument("--cloud", required=True)
    s.add_argument("--prev", help="previous estimates JSON")
    s.add_argument("--shapes", help="comma-separated shape names")
    s.add_argument("--out", help="estimates JSON")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("collect", parents=[common], help="oracle-labeled training data")
    s.add_argument("--n-trials", type=int, default=150)
    s.add_argument("--trials-per-scene", type=int, default=5)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_collect)

    s = sub.add_parser("train", parents=[common], help="train the random forest")
    s.add_argument("--data", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="score a model on labeled rows")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("learning-curve", parents=[common], help="held-out accuracy per training size")
    s.add_argument("--data", required=True)
    s.add_argument("--holdout", required=True)
    s.add_argument("--sizes", help="comma-separated sizes (default 10,20,...)")
    s.add_argument("--repeats", type=int, default=10)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_learning_curve)

    s = sub.add_parser("run-episode", parents=[common], help="pick until empty or out of budget")
    s.add_argument("--scene", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--views", type=int, default=None)
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-trials", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_run_episode)

    s = sub.add_parser("evaluate", parents=[common], help="confusion-matrix metrics over record files")
    s.add_argument("--records", nargs="+", required=True, help="JSON-lines files or glob patterns")
    s.add_argument("--out", help="metrics CSV (stdout if omitted)")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("bench-detect", parents=[common], help="detection wall time vs objects and threads")
    s.add_argument("--max-objects", type=int, default=9)
    s.add_argument("--threads-list", default="1,2,4,8")
    s.add_argument("--repeats", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--clearance", type=float, default=0.008, help="minimum gap between objects, meters")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench_detect)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BinpickError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
