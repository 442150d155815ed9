"""Aggregate run configuration with strict JSON round-tripping."""

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .grasp import GraspConfig
from .motion.gantry import GantryModel, WaypointConfig
from .motion.planner import PlannerParams
from .perception import PerceptionConfig
from .selection import LeafSelectionConfig

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    home: tuple = (1.5, 0.75, 0.9)  # tool-tip start position, world metres
    trial_id: int = 0
    max_leaf_fallbacks: int = 5

    def __post_init__(self):
        if len(self.home) != 3:
            raise InputError("home must be an (x, y, z) triple")
        object.__setattr__(self, "home", tuple(float(x) for x in self.home))


@dataclass(frozen=True)
class ReloadConfig:
    capacity: int = 10
    station: tuple = (0.1, 0.1, 1.0)  # tool-tip position at the cartridge, world metres

    def __post_init__(self):
        if int(self.capacity) < 1:
            raise InputError("reload capacity must be >= 1")
        if len(self.station) != 3:
            raise InputError("station must be an (x, y, z) triple")
        object.__setattr__(self, "station", tuple(float(x) for x in self.station))


SECTIONS = {
    "perception": PerceptionConfig,
    "leaf_selection": LeafSelectionConfig,
    "grasp": GraspConfig,
    "waypoints": WaypointConfig,
    "planner": PlannerParams,
    "gantry": GantryModel,
    "pipeline": PipelineConfig,
    "reload": ReloadConfig,
}


@dataclass(frozen=True, eq=False)
class Config:
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    leaf_selection: LeafSelectionConfig = field(default_factory=LeafSelectionConfig)
    grasp: GraspConfig = field(default_factory=GraspConfig)
    waypoints: WaypointConfig = field(default_factory=WaypointConfig)
    planner: PlannerParams = field(default_factory=PlannerParams)
    gantry: GantryModel = field(default_factory=GantryModel)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    reload: ReloadConfig = field(default_factory=ReloadConfig)

    def to_dict(self):
        out = {"schema_version": SCHEMA_VERSION}
        for name in SECTIONS:
            section = getattr(self, name)
            out[name] = {f.name: _plain(getattr(section, f.name)) for f in dataclasses.fields(section)}
        return out

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def replace(self, **sections):
        return dataclasses.replace(self, **sections)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise InputError("config must be a JSON object")
        d = dict(d)
        version = d.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise InputError(f"unsupported config schema_version {version}")
        unknown = sorted(set(d) - set(SECTIONS))
        if unknown:
            raise InputError(f"unknown config section(s): {', '.join(unknown)}")
        kwargs = {}
        for name, values in d.items():
            kind = SECTIONS[name]
            if not isinstance(values, dict):
                raise InputError(f"config section {name!r} must be an object")
            known = {f.name for f in dataclasses.fields(kind)}
            bad = sorted(set(values) - known)
            if bad:
                raise InputError(f"unknown key(s) in {name}: {', '.join(bad)}")
            args = {k: tuple(v) if isinstance(v, list) and k != "tool_offset" else v for k, v in values.items()}
            try:
                kwargs[name] = kind(**args)
            except (TypeError, ValueError) as exc:
                raise InputError(f"invalid {name} config: {exc}") from exc
        return cls(**kwargs)


def _plain(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def load_config(path=None):
    """Defaults when ``path`` is None, else the JSON file overlaid on them."""
    if path is None:
        return Config()
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from exc
    return Config.from_dict(data)
