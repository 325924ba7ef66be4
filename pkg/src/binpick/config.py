"""Run configuration: one JSON document with a ``version`` field.

Every section maps onto a dataclass; unknown keys anywhere are rejected so a
typo cannot silently fall back to a default.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .features import GripperModel
from .fusion import DetectConfig
from .pipeline import PipelineConfig
from .scene import SceneConfig
from .sensing import ReachabilityModel, SensorModel

VERSION = 1


@dataclass(frozen=True)
class SceneSection:
    count: int = 9
    parts: tuple = ("cylinder",)
    bin_extents: tuple = (0.30, 0.24, 0.08)
    wall: float = 0.01
    max_gap: float = 0.012
    min_clearance: float = 0.0
    jitter: bool = False
    catalog: str = None  # optional JSON shape catalog path


@dataclass(frozen=True)
class SensorSection:
    fov_x: float = 0.8
    fov_y: float = 0.8
    width: int = 200
    height: int = 200
    sigma: float = 0.0005
    min_range: float = 0.1
    max_range: float = 1.5
    faces: int = 20
    standoffs: tuple = (0.45, 0.60)


@dataclass(frozen=True)
class FeatureSection:
    b_y: int = 5
    b_z: int = 5
    w_y: float = 0.01
    w_z: float = 0.01


@dataclass(frozen=True)
class ForestSection:
    n_trees: int = 200
    features_per_split: int = 5
    max_depth: int = 5
    bootstrap_frac: float = 0.7
    replace: bool = False


@dataclass(frozen=True)
class PipelineSection:
    f: int = 3
    thresholds: tuple = None  # None: quantile split
    alpha: float = 0.1
    accept_threshold: float = 0.5
    max_views: int = 3
    max_trials: int = 12
    margin: float = 0.002


@dataclass(frozen=True)
class SeedSection:
    scene: int = 0
    collect: int = 1000
    forest: int = 0
    curve: int = 0


@dataclass(frozen=True)
class RunConfig:
    scene: SceneSection = SceneSection()
    sensor: SensorSection = SensorSection()
    cell: float = 0.01
    features: FeatureSection = FeatureSection()
    forest: ForestSection = ForestSection()
    pipeline: PipelineSection = PipelineSection()
    seeds: SeedSection = SeedSection()
    threads: int = 1
    version: int = VERSION

    # -- conversions -----------------------------------------------------
    def to_dict(self):
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if data.get("version", VERSION) != VERSION:
            raise ConfigError(f"unsupported config version {data.get('version')!r}")
        cfg = _build(cls, data, "")
        cfg.validate()
        return cfg

    def validate(self):
        s, se, fe, fo, p = self.scene, self.sensor, self.features, self.forest, self.pipeline
        checks = [
            (s.count >= 1, "scene.count must be >= 1"),
            (min(s.bin_extents) > 0 and len(s.bin_extents) == 3, "scene.bin_extents must be three positive numbers"),
            (s.max_gap >= s.min_clearance >= 0, "scene gaps must satisfy 0 <= min_clearance <= max_gap"),
            (0 < se.fov_x < math.pi and 0 < se.fov_y < math.pi, "sensor field of view must lie in (0, pi)"),
            (se.width >= 1 and se.height >= 1, "sensor resolution must be positive"),
            (se.sigma >= 0 and se.max_range > se.min_range >= 0, "bad sensor noise or range"),
            (se.faces in (4, 6, 8, 12, 20), "sensor.faces must name a regular polyhedron"),
            (self.cell > 0, "cell must be positive"),
            (fe.b_y >= 1 and fe.b_z >= 1 and fe.w_y > 0 and fe.w_z > 0, "feature bins must be positive"),
            (fo.n_trees >= 1 and fo.max_depth >= 0 and fo.features_per_split >= 1, "bad forest hyperparameters"),
            (0 < fo.bootstrap_frac <= 1, "forest.bootstrap_frac must lie in (0, 1]"),
            (p.f >= 1 and p.max_views >= 1 and p.max_trials >= 1, "pipeline counts must be >= 1"),
            (p.alpha >= 0, "pipeline.alpha must be non-negative"),
            (self.threads >= 1, "threads must be >= 1"),
        ]
        if p.thresholds is not None:
            t = list(p.thresholds)
            checks.append((len(t) == p.f - 1, "pipeline.thresholds needs f-1 values"))
            checks.append((all(a > b for a, b in zip(t, t[1:])), "pipeline.thresholds must be strictly decreasing"))
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    # -- views onto module configs ----------------------------------------
    @property
    def bins(self):
        f = self.features
        return (f.b_y, f.b_z, f.w_y, f.w_z)

    def scene_config(self):
        s = self.scene
        return SceneConfig(count=s.count, parts=tuple(s.parts), bin_extents=tuple(s.bin_extents), wall=s.wall,
                           max_gap=s.max_gap, min_clearance=s.min_clearance, jitter=s.jitter)

    def sensor_model(self):
        s = self.sensor
        return SensorModel(s.fov_x, s.fov_y, s.width, s.height, s.sigma, s.min_range, s.max_range)

    def forest_kwargs(self):
        f = self.forest
        return dict(n_trees=f.n_trees, max_depth=f.max_depth, bootstrap_frac=f.bootstrap_frac,
                    features_per_split=f.features_per_split, replace=f.replace, threads=self.threads)

    def pipeline_config(self, **overrides):
        p = self.pipeline
        cfg = PipelineConfig(gripper=GripperModel(), sensor=self.sensor_model(), reach=ReachabilityModel(),
                             faces=self.sensor.faces, standoffs=tuple(self.sensor.standoffs), cell=self.cell,
                             bins=self.bins, alpha=p.alpha, accept_threshold=p.accept_threshold,
                             max_views=p.max_views, f=p.f,
                             thresholds=None if p.thresholds is None else tuple(p.thresholds),
                             margin=p.margin, detect=DetectConfig(parallelism=self.threads),
                             max_trials=p.max_trials, threads=self.threads)
        return replace(cfg, **overrides) if overrides else cfg

    def with_overrides(self, overrides: dict):
        """Apply dotted-key overrides such as ``{"pipeline.alpha": 0.05}``."""
        data = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            node = data
            parts = key.split(".")
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    raise ConfigError(f"unknown config key {key!r}")
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return RunConfig.from_dict(data)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _build(cls, data, where):
    names = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"unknown config key(s) {', '.join(where + k for k in unknown)}")
    kw = {}
    for k, v in data.items():
        default = getattr(cls(), k)
        if hasattr(default, "__dataclass_fields__"):
            if not isinstance(v, dict):
                raise ConfigError(f"{where}{k} must be an object")
            kw[k] = _build(type(default), v, f"{where}{k}.")
        elif isinstance(default, tuple) or (default is None and isinstance(v, list)):
            if v is not None and not isinstance(v, (list, tuple)):
                raise ConfigError(f"{where}{k} must be a list")
            kw[k] = None if v is None else tuple(v)
        elif isinstance(default, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"{where}{k} must be true or false")
            kw[k] = v
        elif isinstance(default, int) and not isinstance(default, bool):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{where}{k} must be an integer")
            kw[k] = v
        elif isinstance(default, float):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{where}{k} must be a number")
            kw[k] = float(v)
        else:
            kw[k] = v
    return cls(**kw)


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(data)


def save_config(path, cfg: RunConfig):
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
