"""Experiment configuration: YAML <-> nested dataclasses."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .ddpg.agent import TrainConfig
from .env import EpisodeConfig
from .netmodel import ChannelParams, TaskDistConfig, TopologyConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSection:
    seed: int
    out_dir: str = "runs"
    eval_episodes: int = 20
    policies: tuple = ("proposed", "local", "full-offload", "random", "oracle")
    oracle_cap: int = 1_000_000
    record_wall_clock: bool = False
    switch_episode: int = 3000
    bandwidth_factor: float = 10.0
    device_grid: tuple = (20, 60, 100)
    lr_grid: tuple = (1e-2, 1e-3, 1e-4, 1e-5)
    discount_grid: tuple = (0.5, 0.6, 0.65, 0.7)
    convergence_gap: float = 0.2

    def __post_init__(self):
        if self.eval_episodes < 0:
            raise ValueError("eval_episodes must be >= 0")
        if self.switch_episode < 0:
            raise ValueError("switch_episode must be >= 0")
        if self.bandwidth_factor <= 0:
            raise ValueError("bandwidth_factor must be > 0")


SECTIONS = {
    "topology": TopologyConfig,
    "channel": ChannelParams,
    "tasks": TaskDistConfig,
    "episode": EpisodeConfig,
    "train": TrainConfig,
    "experiment": ExperimentSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentSection
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    tasks: TaskDistConfig = field(default_factory=TaskDistConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    @property
    def seed(self) -> int:
        return self.experiment.seed

    def with_overrides(self, seed=None, episodes=None, out_dir=None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, experiment=dataclasses.replace(cfg.experiment, seed=int(seed)))
        if episodes is not None:
            cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, episodes=int(episodes)))
        if out_dir is not None:
            cfg = dataclasses.replace(cfg, experiment=dataclasses.replace(cfg.experiment, out_dir=str(out_dir)))
        return cfg

    def replace(self, section: str, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def _listify(value):
    if isinstance(value, tuple):
        return [_listify(v) for v in value]
    return value


def _build_section(name: str, cls, raw) -> object:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(raw).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}: unknown field")
    missing = [k for k, f in known.items()
               if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
               and k not in raw]
    if missing:
        raise ConfigError(f"{name}.{missing[0]}: required field is missing")
    kwargs = {k: _tuplify(v) for k, v in raw.items()}
    for k, v in kwargs.items():
        # YAML 1.1 reads "1e-3" (no dot) as a string
        if isinstance(v, str) and isinstance(known[k].default, float):
            try:
                kwargs[k] = float(v)
            except ValueError:
                raise ConfigError(f"{name}.{k}: expected a number, got {v!r}") from None
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown section")
    if "experiment" not in data:
        raise ConfigError("experiment.seed: required field is missing")
    parts = {name: _build_section(name, cls, data.get(name)) for name, cls in SECTIONS.items()}
    return ExperimentConfig(**parts)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for name in SECTIONS:
        section = getattr(cfg, name)
        out[name] = {f.name: _listify(getattr(section, f.name)) for f in dataclasses.fields(section)}
    return out


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise ConfigError(f"{where}malformed YAML ({getattr(exc, 'problem', exc)})") from None
    return config_from_dict(data if data is not None else {})


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(dump_config(cfg))


PROFILES = ("full", "desk")


def load_profile(name: str) -> ExperimentConfig:
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}; choose from {PROFILES}")
    text = resources.files("edgeoffload").joinpath(f"profiles/{name}.yaml").read_text()
    return parse_config(text)


def resolve_config(path_or_profile: str) -> ExperimentConfig:
    """A file path, or the name of a bundled profile."""
    if path_or_profile in PROFILES and not Path(path_or_profile).exists():
        return load_profile(path_or_profile)
    return load_config(path_or_profile)
