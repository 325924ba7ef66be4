"""Picking pipeline: grasp database, candidate funnel, scoring, the ground-truth
oracle, the iterative multi-view trial loop and confusion-matrix metrics."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fusion, occupancy
from .convex import gjk_distance, obb_overlap, obb_support
from .errors import BadThresholds, EmptyCloud, EmptyScene, NoCandidate, UnknownTarget
from .features import DEFAULT_BINS, GripperModel, batch_features, build_swept_volume, sweep_boxes, target_masks
from .geometry import DEFAULT_CATALOG, Box, Cylinder, RigidTransform, axis_angle, support
from .plyio import PointCloud
from .scene import SceneConfig, assign_traversability, generate_scene, remove_object
from .sensing import ReachabilityModel, SensorModel, candidate_poses, capture, reachable, strip_bin_points

# --------------------------------------------------------------------------
# Grasp database (object frame)


@dataclass(frozen=True, eq=False)
class GraspEntry:
    pose: RigidTransform  # grasp frame in the object frame
    width: float  # final finger opening theta
    quality: float


@dataclass(eq=False)
class GraspDatabase:
    shape_ref: str
    entries: list

    def __post_init__(self):
        if not self.entries:
            raise ValueError("grasp database must hold at least one entry")
        if not all(np.isfinite(e.quality) for e in self.entries):
            raise ValueError("quality indices must be finite")

    def __len__(self):
        return len(self.entries)

    def qualities(self):
        return np.array([e.quality for e in self.entries])

    def to_dict(self):
        return {"version": 1, "shape": self.shape_ref,
                "entries": [{"pose": e.pose.as_matrix().tolist(), "width": e.width, "quality": e.quality}
                            for e in self.entries]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["shape"], [GraspEntry(RigidTransform.from_matrix(e["pose"]), float(e["width"]),
                                           float(e["quality"])) for e in d["entries"]])


def _frame(x, y, z):
    return np.column_stack([x, y, z])


def _tilted(R, tilt):
    return axis_angle(R[:, 1], tilt) @ R if tilt else R


def _entry(R, center, tip_past, width, quality):
    return GraspEntry(RigidTransform.from_rt(R, center + tip_past * R[:, 2], fix=True), float(width), float(quality))


def _tie_break(entries):
    """Tiny index-dependent offset so quality ranks (and quantile splits) are strict."""
    d = len(entries)
    return [replace(e, quality=e.quality + 1e-6 * (d - i) / d) for i, e in enumerate(entries)]


def cylinder_grasps(shape: Cylinder, gripper=GripperModel(), n_angles=12, n_axial=5, tilts_deg=(0.0, 20.0, -20.0),
                    tip_past=0.005):
    """Antipodal grasps across the diameter; the finger width runs along the axis."""
    half = shape.height / 2
    s_max = max(half - gripper.finger_width / 2 - 0.005, 0.0)
    out = []
    for k in range(n_angles):
        phi = 2 * math.pi * k / n_angles
        a = np.array([math.cos(phi), math.sin(phi), 0.0])
        ez = np.array([0.0, 0.0, 1.0])
        R0 = _frame(ez, np.cross(a, ez), a)
        for s in np.linspace(-s_max, s_max, n_axial):
            for tdeg in tilts_deg:
                t = math.radians(tdeg)
                q = math.cos(t) * (1.0 - 0.5 * abs(s) / max(s_max, 1e-9))
                out.append(_entry(_tilted(R0, t), s * ez, tip_past, 2 * shape.radius, q))
    return _tie_break(out)


def box_grasps(shape: Box, gripper=GripperModel(), n_axial=7, tilts_deg=(0.0, 10.0, -10.0, 20.0, -20.0), tip_past=0.005):
    """Side grasps across each short dimension plus approaches along the long axis."""
    ext = np.asarray(shape.extents, dtype=float)
    long_ax = int(np.argmax(ext))
    short = [a for a in range(3) if a != long_ax]
    E = np.eye(3)
    out = []
    half = ext[long_ax] / 2
    s_max = max(half - gripper.finger_width / 2 - 0.005, 0.0)
    for c in short:
        if ext[c] >= gripper.preshape:
            continue
        o = [a for a in short if a != c][0]
        patch = min(1.0, ext[o] / gripper.finger_length)
        for sign in (1.0, -1.0):
            z = sign * E[o]
            y = E[c]
            R0 = _frame(np.cross(y, z), y, z)
            for s in np.linspace(-s_max, s_max, n_axial):
                for tdeg in tilts_deg:
                    t = math.radians(tdeg)
                    q = patch * math.cos(t) * (1.0 - 0.5 * abs(s) / max(s_max, 1e-9))
                    out.append(_entry(_tilted(R0, t), s * E[long_ax], tip_past, ext[c], q))
        for sign in (1.0, -1.0):
            z = sign * E[long_ax]
            y = E[c]
            out.append(_entry(_frame(np.cross(y, z), y, z), np.zeros(3), tip_past, ext[c], 0.5 * patch))
    return _tie_break(out)


def default_database(shape_ref, catalog=None, gripper=GripperModel()):
    shape = (catalog or DEFAULT_CATALOG)[shape_ref]
    if isinstance(shape, Cylinder):
        return GraspDatabase(shape_ref, cylinder_grasps(shape, gripper))
    if isinstance(shape, Box):
        return GraspDatabase(shape_ref, box_grasps(shape, gripper))
    lo, hi = shape.local_bounds()
    return GraspDatabase(shape_ref, box_grasps(Box(tuple(hi - lo)), gripper))


# --------------------------------------------------------------------------
# Candidates


@dataclass(eq=False)
class GraspCandidate:
    pose: RigidTransform
    width: float
    quality: float
    db_index: int
    est_index: int
    shape_ref: str
    object_pose: RigidTransform = None
    subset: int = -1
    score: float = None
    adjusted: float = None
    n_blue: int = None
    predicted: bool = None
    features: np.ndarray = None

    def key(self):
        return (self.est_index, self.db_index)


def expand_candidates(db, estimates):
    """d x e candidates: r_ij = r_oj + R_oj r_i, R_ij = R_oj R_i (estimate-major order).

    ``db`` is one database or a mapping shape_ref -> database.
    """
    out = []
    for j, est in enumerate(estimates):
        d = db[est.shape_ref] if isinstance(db, dict) else db
        Ro, ro = est.pose.rotation, est.pose.translation
        for i, e in enumerate(d.entries):
            pose = RigidTransform.trusted(Ro @ e.pose.rotation, ro + Ro @ e.pose.translation)
            out.append(GraspCandidate(pose, e.width, e.quality, i, j, est.shape_ref, est.pose))
    return out


def quantile_thresholds(values, f=3):
    """f-1 strictly decreasing thresholds giving subsets as equal in size as possible."""
    v = np.sort(np.asarray(values, dtype=float))[::-1]
    n = len(v)
    out = []
    for k in range(1, f):
        cut = int(round(k * n / f))
        cut = min(max(cut, 1), n - 1)
        out.append(0.5 * (v[cut - 1] + v[cut]))
    return out


def split_by_quality(cands, thresholds):
    t = list(thresholds)
    if any(not (a > b) for a, b in zip(t, t[1:])):
        raise BadThresholds("quality thresholds must be strictly decreasing")
    subsets = [[] for _ in range(len(t) + 1)]
    for c in cands:
        k = 0
        while k < len(t) and not c.quality > t[k]:
            k += 1
        c.subset = k
        subsets[k].append(c)
    return subsets


PALM = (0.05, 0.03)  # palm width along x and thickness along z, meters


def body_boxes(gripper: GripperModel, margin=0.002):
    """Grasp-frame boxes swept by the preshaped hand: two fingers plus the palm."""
    fingers = sweep_boxes(gripper, gripper.preshape, margin)[:2]
    L, D, pre, ft = gripper.finger_length, gripper.approach_depth, gripper.preshape, gripper.finger_thickness
    palm = np.array([[-PALM[0] / 2 - margin, -(pre / 2 + ft) - margin, -(L + D) - PALM[1] - margin],
                     [PALM[0] / 2 + margin, pre / 2 + ft + margin, -L + margin]])
    return np.concatenate([fingers, palm[None]], axis=0)


def wrist_position(cand, gripper: GripperModel):
    return cand.pose.apply(np.array([0.0, 0.0, -(gripper.finger_length + PALM[1])]))


def filter_reachable(cands, reach: ReachabilityModel, scene_bin, gripper=GripperModel(), margin=0.002):
    """Workspace radius, approach steepness and hand-vs-bin clearance at preshape."""
    if not cands:
        return []
    ok = np.ones(len(cands), dtype=bool)
    center = scene_bin.bottom_center
    for i, c in enumerate(cands):
        back = -c.pose.rotation[:, 2]
        elev = math.atan2(back[2], math.hypot(back[0], back[1]))
        if elev < reach.approach_elev_min - 1e-12:
            ok[i] = False
        elif np.linalg.norm(wrist_position(c, gripper) - center) > reach.wrist_r_max:
            ok[i] = False
    idx = np.flatnonzero(ok)
    if len(idx) == 0:
        return []
    boxes = body_boxes(gripper, 0.0)
    R = np.array([cands[i].pose.rotation for i in idx])
    t = np.array([cands[i].pose.translation for i in idx])
    c_loc = boxes.mean(axis=1)
    half = (boxes[:, 1] - boxes[:, 0]) / 2
    centers = t[:, None, :] + np.einsum("cij,bj->cbi", R, c_loc)  # (C, B, 3)
    parts = scene_bin.parts()
    hit = np.zeros(len(idx), dtype=bool)
    for shape, pose in parts:
        for b in range(len(boxes)):
            hit |= obb_overlap(centers[:, b], R, np.broadcast_to(half[b], (len(idx), 3)), pose.translation,
                               pose.rotation, shape.half, eps=-margin)
    return [cands[i] for i, h in zip(idx, hit) if not h]


# --------------------------------------------------------------------------
# Scoring


@dataclass(frozen=True)
class ScoreParams:
    alpha: float = 0.1
    margin: float = 0.002
    target_dist: float = 0.003
    bins: tuple = DEFAULT_BINS


def score_candidates(cands, forest, cloud, grid, estimates, alpha=0.1, gripper=GripperModel(), catalog=None,
                     params: ScoreParams = None):
    """Fill score, n_blue and adjusted; sort by subset then adjusted score (descending)."""
    params = params or ScoreParams(alpha=alpha)
    alpha = params.alpha if alpha is None else alpha
    catalog = catalog or DEFAULT_CATALOG
    if not cands:
        return []
    by, bz, wy, wz = params.bins
    svs = [build_swept_volume(c, gripper, params.margin) for c in cands]
    groups = np.array([c.est_index for c in cands], dtype=np.int64)
    pts = cloud.points if len(cloud) else np.zeros((0, 3))
    excl = target_masks(pts, estimates, params.target_dist, catalog)
    X = batch_features(pts, svs, groups, excl, by, bz, wy, wz)
    if grid is not None:
        occ = occupancy.occluded_centers(grid)
        inside = np.zeros((max(len(estimates), 1), len(occ)), dtype=np.bool_)
        for k, e in enumerate(estimates):
            inside[k] = catalog[e.shape_ref].signed_distance_local(e.pose.inverse_apply(occ)) <= 0.0
        blue = batch_features(occ, svs, groups, inside, 1, 1, 1e9, 1e9)[:, 0] if len(occ) else np.zeros(len(cands))
    else:
        blue = np.zeros(len(cands), dtype=np.int64)
    S = forest.predict_proba(X) if forest is not None else np.array([c.quality for c in cands])
    for c, x, s, nb in zip(cands, X, S, blue):
        c.features = x
        c.score = float(s)
        c.n_blue = int(nb)
        c.adjusted = float(s) - alpha * int(nb)
    order = sorted(range(len(cands)), key=lambda i: (cands[i].subset, -cands[i].adjusted, i))
    return [cands[i] for i in order]


# --------------------------------------------------------------------------
# Ground-truth oracle


def match_target(scene, cand, max_dist=0.03):
    """The true object whose centre is nearest the candidate's source estimate."""
    if not scene.objects:
        raise UnknownTarget("scene is empty")
    c = cand.object_pose.translation
    best = min(scene.objects, key=lambda o: float(np.linalg.norm(o.pose.translation - c)))
    if np.linalg.norm(best.pose.translation - c) > max_dist:
        raise UnknownTarget("no object near the estimated target")
    return best


def oracle_execute(scene, cand, gripper=GripperModel(), return_detail=False):
    """(success, contacted_neighbor) from swept-volume contact and traversability."""
    target = match_target(scene, cand)
    sv = build_swept_volume(cand, gripper, margin=0.0)
    centers, Rs, halves = sv.obbs()
    sc, sr = sv.bounding_sphere()
    contacted = []
    for o in scene.objects:
        if o.id == target.id:
            continue
        shape = scene.shape_of(o)
        if np.linalg.norm(o.pose.translation - sc) > sr + shape.bounding_radius() + 1e-9:
            continue
        for b in range(len(centers)):
            d = gjk_distance(obb_support(centers[b], Rs[b], halves[b]), lambda v, s=shape, p=o.pose: support(s, p, v))
            if d <= 1e-9:
                contacted.append(o)
                break
    err = float(np.linalg.norm(cand.object_pose.translation - target.pose.translation))
    tol = (gripper.preshape - cand.width) / 4.0
    success = err <= tol and all(o.traversable for o in contacted)
    if return_detail:
        return bool(success), bool(contacted), {"target": target.id, "contacts": [o.id for o in contacted],
                                                "pose_error": err, "tolerance": tol}
    return bool(success), bool(contacted)


# --------------------------------------------------------------------------
# Episode bookkeeping


@dataclass
class EpisodeRecord:
    trial: int
    sensor_poses: list = field(default_factory=list)
    views: int = 0
    candidate: dict = None
    predicted: bool = None
    success: bool = None
    contacted: bool = None
    target_id: int = None
    funnel: dict = field(default_factory=dict)
    features: list = None
    seed: int = None
    view_scores: list = field(default_factory=list)  # best adjusted score per view, None if no candidate

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line):
        return cls(**json.loads(line))


def save_records(path, records):
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def load_records(path):
    return [EpisodeRecord.from_json(l) for l in Path(path).read_text().splitlines() if l.strip()]


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f_value: float
    tp: int
    fp: int
    fn: int
    tn: int

    def __iter__(self):
        return iter((self.precision, self.recall, self.f_value, {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                                                                 "tn": self.tn}))


def metrics_from_counts(tp, fp, fn, tn):
    p = tp / (tp + fp) if tp + fp else None
    r = tp / (tp + fn) if tp + fn else None
    f = 2 * p * r / (p + r) if p is not None and r is not None and p + r > 0 else None
    return Metrics(p, r, f, int(tp), int(fp), int(fn), int(tn))


def compute_metrics(records):
    tp = fp = fn = tn = 0
    for r in records:
        if r.predicted is None or r.success is None:
            continue
        if r.predicted and r.success:
            tp += 1
        elif r.predicted:
            fp += 1
        elif r.success:
            fn += 1
        else:
            tn += 1
    return metrics_from_counts(tp, fp, fn, tn)


# --------------------------------------------------------------------------
# Trial loop


@dataclass(frozen=True)
class PipelineConfig:
    gripper: GripperModel = GripperModel()
    sensor: SensorModel = SensorModel()
    reach: ReachabilityModel = ReachabilityModel()
    faces: int = 20
    standoffs: tuple = (0.45, 0.60)
    cell: float = 0.01
    bins: tuple = DEFAULT_BINS
    alpha: float = 0.1
    accept_threshold: float = 0.5
    max_views: int = 3
    f: int = 3
    thresholds: tuple = None  # explicit t_1 > ... > t_{f-1}; None means quantiles
    margin: float = 0.002
    target_dist: float = 0.003
    min_distance: float = 0.005
    merge_threshold: float = 0.1
    dedup_voxel: float = 0.001
    detect: fusion.DetectConfig = fusion.DetectConfig()
    labeling: bool = False
    max_trials: int = 12
    threads: int = 1


@dataclass(eq=False)
class EpisodeState:
    scene: object
    seed: int = 0
    trial: int = 0
    prev_seg: fusion.SegmentedCloud = None
    prev_estimates: list = field(default_factory=list)
    prev_grid: occupancy.OccupancyGrid = None
    blacklist: set = field(default_factory=set)
    dbs: dict = None
    candidates_sensor: list = None


def _capture_seed(seed, trial, view):
    return int(np.random.SeedSequence([int(seed), int(trial), int(view)]).generate_state(1)[0])


def _sensor_candidates(state, config):
    if state.candidates_sensor is None:
        allc = candidate_poses(state.scene.bin, config.faces, config.standoffs)
        state.candidates_sensor = [c for c in allc if reachable(c, config.reach, state.scene.bin.bottom_center)]
        if not state.candidates_sensor:
            raise NoCandidate("no reachable sensor pose")
    return state.candidates_sensor


def _blacklist_key(scene, cand):
    try:
        return (match_target(scene, cand).id, cand.db_index)
    except UnknownTarget:
        return None


def _perceive(state, config, pose, view, merged_prev):
    """Capture at ``pose``, merge with ``merged_prev`` (a SegmentedCloud) and detect."""
    cloud = capture(state.scene, config.sensor, pose, _capture_seed(state.seed, state.trial, view),
                    threads=config.threads)
    if merged_prev is not None and merged_prev.segments:
        merged = fusion.merge_clouds(merged_prev, cloud, config.min_distance, config.merge_threshold,
                                     config.dedup_voxel)
    else:
        merged = cloud
    shape_refs = tuple(sorted({o.shape_ref for o in state.scene.objects})) or ("cylinder",)
    ests = fusion.detect_all(merged, state.prev_estimates, config.detect.reuse_dist, config.detect.parallelism,
                             shape_refs=shape_refs, catalog=state.scene.catalog, bin_box=state.scene.bin,
                             config=config.detect)
    try:
        seg = fusion.segment(merged, config.detect.cluster_tol, config.detect.min_cluster, config.detect.max_segments,
                             state.scene.bin)
    except EmptyCloud:
        seg = fusion.SegmentedCloud(merged, [])
    return merged, seg, ests


def evaluate_view(state, config, forest, merged, ests, poses):
    """Grid, candidate funnel and scores for the current merged cloud."""
    grid = occupancy.build_grid(state.scene.bin, strip_bin_points(merged, state.scene.bin), poses, config.cell,
                                config.sensor)
    funnel = {"expanded": 0, "reachable": 0, "accepted": 0}
    if not ests:
        return grid, [], [], funnel
    dbs = state.dbs
    for e in ests:
        if e.shape_ref not in dbs:
            dbs[e.shape_ref] = default_database(e.shape_ref, state.scene.catalog, config.gripper)
    cands = expand_candidates(dbs, ests)
    funnel["expanded"] = len(cands)
    if config.thresholds is not None:
        thr = list(config.thresholds)
    else:
        thr = quantile_thresholds(np.concatenate([dbs[k].qualities() for k in sorted({e.shape_ref for e in ests})]),
                                  config.f)
    split_by_quality(cands, thr)
    cands = filter_reachable(cands, config.reach, state.scene.bin, config.gripper, config.margin)
    cands = [c for c in cands if _blacklist_key(state.scene, c) not in state.blacklist]
    funnel["reachable"] = len(cands)
    params = ScoreParams(config.alpha, config.margin, config.target_dist, config.bins)
    if config.labeling:
        cands = score_candidates(cands, None, merged, None, ests, 0.0, config.gripper, state.scene.catalog, params)
        cands.sort(key=lambda c: -c.quality)
    else:
        cands = score_candidates(cands, forest, merged, grid, ests, config.alpha, config.gripper, state.scene.catalog,
                                 params)
    accepted = [c for c in cands if c.adjusted >= config.accept_threshold]
    funnel["accepted"] = len(accepted)
    return grid, cands, accepted, funnel


def run_trial(state: EpisodeState, forest, config: PipelineConfig) -> EpisodeRecord:
    """One pick attempt with up to ``max_views`` captures."""
    if not state.scene.objects:
        raise EmptyScene("no objects left in the bin")
    if state.dbs is None:
        state.dbs = {}
    sensors = _sensor_candidates(state, config)
    record = EpisodeRecord(trial=state.trial, seed=state.seed)
    merged_prev = state.prev_seg
    poses = []
    chosen = None
    predicted = None
    max_views = 1 if config.labeling else config.max_views
    grid = state.prev_grid
    cands = []
    for view in range(max_views):
        if grid is None:
            pose = occupancy.select_view_first(occupancy.OccupancyGrid.for_bin(state.scene.bin, config.cell), sensors,
                                               config.sensor)
        else:
            pose = occupancy.select_view_next(grid, sensors, config.sensor)
        poses.append(pose)
        record.sensor_poses.append([int(pose.face_index), float(pose.standoff)])
        merged, seg, ests = _perceive(state, config, pose, view, merged_prev)
        state.prev_estimates = ests
        merged_prev = seg
        grid, cands, accepted, funnel = evaluate_view(state, config, forest, merged, ests, poses)
        record.views = view + 1
        record.funnel = funnel
        record.view_scores.append(max((c.adjusted for c in cands), default=None))
        if config.labeling:
            if cands:
                chosen, predicted = cands[0], None
            break
        if accepted:
            best_subset = min(c.subset for c in accepted)
            chosen = next(c for c in accepted if c.subset == best_subset)
            predicted = True
            break
    if chosen is None and cands and not config.labeling:
        chosen = max(cands, key=lambda c: c.adjusted)
        predicted = False
    state.prev_seg = merged_prev
    state.prev_grid = grid
    if chosen is not None:
        record.candidate = {"db_index": chosen.db_index, "est_index": chosen.est_index, "shape": chosen.shape_ref,
                            "pose": chosen.pose.as_matrix().tolist(), "width": chosen.width,
                            "quality": chosen.quality, "subset": chosen.subset, "score": chosen.score,
                            "adjusted": chosen.adjusted, "n_blue": chosen.n_blue}
        record.features = [int(v) for v in chosen.features]
        record.predicted = predicted
        try:
            success, contacted, detail = oracle_execute(state.scene, chosen, config.gripper, return_detail=True)
            record.target_id = detail["target"]
        except UnknownTarget:
            success, contacted = False, False
        record.success, record.contacted = success, contacted
        if success:
            state.scene = assign_traversability(remove_object(state.scene, record.target_id),
                                                0.015, 8)
        else:
            key = _blacklist_key(state.scene, chosen)
            state.blacklist.add(key if key is not None else ("est", chosen.est_index, chosen.db_index))
    state.trial += 1
    return record


def run_episode(scene, forest, config: PipelineConfig = PipelineConfig(), seed=0, max_trials=None):
    """Trials until the bin is empty, nothing is pickable, or the trial budget runs out."""
    state = EpisodeState(scene, seed)
    records = []
    budget = config.max_trials if max_trials is None else max_trials
    while state.scene.objects and state.trial < budget:
        rec = run_trial(state, forest, config)
        records.append(rec)
        if rec.candidate is None:
            break
    return records


def collect_training(n_trials, scene_config: SceneConfig = SceneConfig(), config: PipelineConfig = PipelineConfig(),
                     seed=1000, trials_per_scene=5, catalog=None):
    """``n_trials`` oracle-labeled (features, success) rows from fresh seeded scenes."""
    config = replace(config, labeling=True)
    rows = []
    s = int(seed)
    while len(rows) < n_trials:
        if s - seed > 10 * n_trials + 10:
            raise NoCandidate("labeling produced too few executable grasps")
        scene = generate_scene(scene_config, s, catalog)
        budget = min(trials_per_scene, n_trials - len(rows))
        for r in run_episode(scene, None, config, seed=s, max_trials=budget):
            if r.features is not None and r.success is not None:
                rows.append((np.array(r.features, dtype=np.int64), bool(r.success)))
        s += 1
    return rows[:n_trials]


# objects kept apart so each one is its own segment and the work grows with the count
BENCH_SCENE = SceneConfig(min_clearance=0.008, max_gap=0.02)


def time_detection(n_objects, threads, seed=0, repeats=3, scene_config: SceneConfig = BENCH_SCENE,
                   sensor: SensorModel = SensorModel()):
    """Best-of-``repeats`` wall time of detect_all on a top-view capture of the first ``n_objects`` objects.

    Counts share one generated scene, so a larger count only adds objects.
    """
    full = generate_scene(replace(scene_config, count=max(int(n_objects), scene_config.count)), seed)
    scene = replace(full, objects=full.objects[:int(n_objects)])
    pose = candidate_poses(scene.bin)[0]
    cloud = capture(scene, sensor, pose, seed=seed)
    refs = tuple(sorted({o.shape_ref for o in scene.objects}))
    cfg = replace(fusion.DetectConfig(), max_segments=max(fusion.DetectConfig().max_segments, int(n_objects)))
    best = math.inf
    n_found = 0
    for k in range(repeats + 1):
        t0 = time.perf_counter()
        ests = fusion.detect_all(cloud, (), parallelism=int(threads), shape_refs=refs, catalog=scene.catalog,
                                 bin_box=scene.bin, config=cfg)
        if k:  # the first pass only warms caches
            best = min(best, time.perf_counter() - t0)
        n_found = len(ests)
    return best, n_found
