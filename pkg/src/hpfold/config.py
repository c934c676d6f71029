"""Run configuration: every knob of a training run in one JSON document.

Config files must be complete; a missing or unknown field is an error that
names the field. ``default_run_config().to_json()`` gives a starting point.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .network import NetworkConfig
from .search import SearchConfig


class ConfigError(ValueError):
    pass


@dataclass
class SelfPlayConfig:
    memory_capacity: int = 60_000
    batch_size: int = 256
    gate_interval: int = 2000
    gate_set_size: int = 50
    gate_seed: int = 99
    steps_per_episode: int = 4
    episodes_per_round: int = 8
    log_interval: int = 100
    mirror: bool = False


@dataclass
class CorpusConfig:
    path: str | None = None
    count: int = 2000
    min_length: int = 12
    max_length: int = 16
    min_h_fraction: float = 0.3
    max_h_fraction: float = 0.7
    seed: int = 1


@dataclass
class RunConfig:
    seed: int = 0
    max_steps: int = 10_000
    time_limit: float | None = None
    search: SearchConfig = field(default_factory=SearchConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    selfplay: SelfPlayConfig = field(default_factory=SelfPlayConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return _build(cls, data, "")

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def _build(cls, data, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'} must be an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config field {prefix}{unknown[0]}")
    kwargs = {}
    for name, f in known.items():
        if name not in data:
            raise ConfigError(f"missing config field {prefix}{name}")
        value = data[name]
        sub = f.default_factory if f.default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            value = _build(sub, value, f"{prefix}{name}.")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{prefix or 'config'}: {exc}") from exc


def default_run_config() -> RunConfig:
    return RunConfig()
