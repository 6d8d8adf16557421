"""Experiment configuration: a versioned YAML document with strict keys.

Every section maps onto a dataclass. Defaults reproduce the LaserTag
hyperparameter column of the paper's appendix; any field can be overridden.
Unknown keys anywhere are errors so that a typo never silently falls back to
a default.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .core import GaeConfig
from .curriculum.buffer import ReplayDistributionConfig
from .curriculum.loop import METHODS
from .curriculum.samplers import MaestroConfig, PfspConfig
from .errors import ConfigError, MaestroError
from .lasertag.env import DEFAULT_MAX_STEPS, MAX_SIDE, MIN_SIDE
from .lasertag.levels import HELD_OUT_LEVELS
from .learner.ppo import PpoConfig

SCHEMA_VERSION = 1
MATRIX_FIXTURES = ("random", "matching_pennies", "rock_paper_scissors")


@dataclass(frozen=True)
class LaserTagSettings:
    policy: str = "mlp"
    hidden: int = 64
    min_side: int = MIN_SIDE
    max_side: int = MAX_SIDE
    max_episode_steps: int = DEFAULT_MAX_STEPS
    level: str | None = None  # train on one held-out level only


@dataclass(frozen=True)
class MatrixSettings:
    num_games: int = 5
    rows: int = 3
    cols: int = 3
    suite_seed: int = 0


@dataclass(frozen=True)
class LoggingSettings:
    metrics_interval: int = 10  # student updates between metrics rows
    snapshot_interval: int = 10  # student updates between resumable snapshots


@dataclass(frozen=True)
class EvaluationSettings:
    runs: dict = field(default_factory=dict)  # method label -> list of run directories
    levels: tuple = HELD_OUT_LEVELS
    episodes_per_pair: int = 5
    seed: int = 0
    greedy: bool = False
    include_self: bool = False
    specialist_budget: int = 0
    sample_envs: int = 16


_SECTIONS = {
    "ppo": PpoConfig,
    "gae": GaeConfig,
    "replay": ReplayDistributionConfig,
    "maestro": MaestroConfig,
    "pfsp": PfspConfig,
    "lasertag": LaserTagSettings,
    "matrix": MatrixSettings,
    "logging": LoggingSettings,
    "evaluation": EvaluationSettings,
}


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "maestro"
    environment: str = "lasertag"
    seeds: tuple = (0,)
    budget: int = 40000
    output_dir: str = "runs/default"
    num_workers: int = 1
    ppo: PpoConfig = field(default_factory=PpoConfig)
    gae: GaeConfig = field(default_factory=GaeConfig)
    replay: ReplayDistributionConfig = field(default_factory=ReplayDistributionConfig)
    maestro: MaestroConfig = field(default_factory=MaestroConfig)
    pfsp: PfspConfig = field(default_factory=PfspConfig)
    lasertag: LaserTagSettings = field(default_factory=LaserTagSettings)
    matrix: MatrixSettings = field(default_factory=MatrixSettings)
    logging: LoggingSettings = field(default_factory=LoggingSettings)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method: unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        env = self.environment
        if env != "lasertag":
            kind, _, fixture = env.partition(":")
            if kind != "matrix" or fixture not in MATRIX_FIXTURES:
                raise ConfigError(
                    f"environment: unsupported {env!r}; use 'lasertag' or matrix:<{'|'.join(MATRIX_FIXTURES)}>"
                )
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if self.budget < 1:
            raise ConfigError("budget: must be >= 1 student update")
        if self.num_workers < 1:
            raise ConfigError("num_workers: must be >= 1")
        if self.lasertag.policy not in ("mlp", "tabular"):
            raise ConfigError(f"lasertag.policy: unknown policy {self.lasertag.policy!r}")
        if self.lasertag.level is not None and self.lasertag.level not in HELD_OUT_LEVELS:
            raise ConfigError(f"lasertag.level: unknown level {self.lasertag.level!r}")
        for name in self.evaluation.levels:
            if name not in HELD_OUT_LEVELS:
                raise ConfigError(f"evaluation.levels: unknown level {name!r}")

    @property
    def ppo_full(self) -> PpoConfig:
        """The PPO config with the top-level GAE section folded in."""
        return dataclasses.replace(self.ppo, gae=self.gae)

    @property
    def matrix_fixture(self) -> str | None:
        return self.environment.partition(":")[2] if self.environment.startswith("matrix") else None

    def to_dict(self) -> dict:
        out = {"version": SCHEMA_VERSION}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name in _SECTIONS:
                v = {
                    sf.name: _plain(getattr(v, sf.name))
                    for sf in dataclasses.fields(v)
                    if not (f.name == "ppo" and sf.name == "gae")
                }
            out[f.name] = _plain(v)
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


def _coerce(cls, f: dataclasses.Field, value, where: str):
    default = f.default if f.default is not dataclasses.MISSING else None
    if f.default_factory is not dataclasses.MISSING:  # type: ignore[misc]
        default = f.default_factory()  # type: ignore[misc]
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list")
        return tuple(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping")
        return {k: list(v) if isinstance(v, (list, tuple)) else [v] for k, v in value.items()}
    return value


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    if cls is PpoConfig:
        fields.pop("gae")
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}: unknown key")
    kwargs = {k: _coerce(cls, fields[k], v, f"{where}.{k}") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (MaestroError, TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a mapping at the top level")
    data = dict(data)
    version = data.pop("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"version: unsupported schema version {version!r}")
    top = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - set(top))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    kwargs = {}
    for k, v in data.items():
        if k in _SECTIONS:
            kwargs[k] = _build(_SECTIONS[k], v or {}, k)
        else:
            kwargs[k] = _coerce(ExperimentConfig, top[k], v, k)
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (MaestroError, TypeError, ValueError) as e:
        raise ConfigError(f"config: {e}") from None


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config: not valid YAML ({e})") from None
    return config_from_dict(data or {})


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"config: cannot read {path} ({e.strerror})") from None
    return parse_config(text)
