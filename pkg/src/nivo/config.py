"""Run configuration: every module's parameters plus the random seed.

JSON layout (all keys optional, defaults shown in the README)::

    {"seed": 0,
     "normals": {"cell_size": 10},
     "planes": {"threshold_overlap": 0.95, ...},
     "rotation": {"parallel_tol": ..., "nonparallel_min_angle": <rad>, "max_residual": <rad>},
     "kcc": {"lambda": 1e-4, "sigma": 0.2, "target": "gaussian", ...},
     "projection": {"resolution_x": 0.01, "resolution_y": 0.01, "grid_size": 256},
     "translation": {"color_match_threshold": 0.05, ...},
     "pipeline": {"coverage_fraction": 0.5, "buffer_size": 4}}

A diagnostics CSV written by a run starts with ``# config: {...}``; passing
that file back as the config reproduces the run.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError
from .kcc import KccParams
from .normals import NormalMapParams
from .pipeline import PipelineConfig
from .planes import PlaneTrackerParams
from .rotation import RotationParams
from .translation import ProjectionConfig, TranslationParams

CONFIG_PREFIX = "# config: "

_GROUPS = {
    "normals": NormalMapParams,
    "planes": PlaneTrackerParams,
    "rotation": RotationParams,
    "kcc": KccParams,
    "projection": ProjectionConfig,
    "translation": TranslationParams,
}
_PIPELINE_KEYS = ("coverage_fraction", "buffer_size")
# JSON name -> attribute name where they differ
_RENAMES = {"kcc": {"lambda": "lam"}}


@dataclass(frozen=True)
class RunConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    seed: int = 0


def _coerce(group, name, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{group}.{name} must be true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(f"{group}.{name} must be an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{group}.{name} must be a number, got {value!r}")
        return float(value)
    return value


def _build_group(group, cls, values):
    if not isinstance(values, dict):
        raise ConfigError(f"{group} must be an object")
    renames = _RENAMES.get(group, {})
    known = {f.name: f for f in fields(cls)}
    defaults = cls()
    kwargs = {}
    for key, value in values.items():
        attr = renames.get(key, key)
        if attr not in known:
            raise ConfigError(f"unknown config key {group}.{key}")
        kwargs[attr] = _coerce(group, key, value, getattr(defaults, attr))
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{group}: {e}") from None


def config_from_dict(d: dict) -> RunConfig:
    """Validate and build; errors name the offending field."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(d) - set(_GROUPS) - {"pipeline", "seed"}
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]}")
    groups = {g: _build_group(g, cls, d.get(g, {})) for g, cls in _GROUPS.items()}
    pipe = d.get("pipeline", {})
    if not isinstance(pipe, dict):
        raise ConfigError("pipeline must be an object")
    extra = {}
    for key, value in pipe.items():
        if key not in _PIPELINE_KEYS:
            raise ConfigError(f"unknown config key pipeline.{key}")
        extra[key] = _coerce("pipeline", key, value, getattr(PipelineConfig(), key))
    seed = _coerce("", "seed", d.get("seed", 0), 0)
    return RunConfig(PipelineConfig(**groups, **extra), seed)


def config_to_dict(cfg: RunConfig) -> dict:
    pc = cfg.pipeline
    out = {"seed": cfg.seed}
    for g in _GROUPS:
        values = asdict(getattr(pc, g))
        for json_name, attr in _RENAMES.get(g, {}).items():
            values[json_name] = values.pop(attr)
        if g == "kcc" and not isinstance(values["target"], str):
            values["target"] = np.asarray(values["target"]).tolist()
        out[g] = values
    out["pipeline"] = {k: getattr(pc, k) for k in _PIPELINE_KEYS}
    return out


def config_header(cfg: RunConfig) -> str:
    return CONFIG_PREFIX + json.dumps(config_to_dict(cfg), sort_keys=True)


def load_config(path) -> RunConfig:
    """Read a JSON config, or the echoed header of a diagnostics CSV."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from None
    if text.startswith(CONFIG_PREFIX):
        text = text.splitlines()[0][len(CONFIG_PREFIX):]
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return config_from_dict(d)


def with_overrides(cfg: RunConfig, seed=None) -> RunConfig:
    return cfg if seed is None else replace(cfg, seed=int(seed))
