"""Experiment configuration: defaults, YAML ingestion and whole-config validation."""
from __future__ import annotations

import dataclasses
import math
import types
import typing
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import yaml

from .errors import ConfigError
from .link import ChannelConfig, ReceiverConfig
from .security.params import SecurityParams
from .transmitter import DriverModel, ModulatorMode, TransmitterConfig

MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class ExperimentConfig:
    transmitter: TransmitterConfig = field(default_factory=TransmitterConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    security: SecurityParams = field(default_factory=SecurityParams)
    seed: int = 20221021
    duration_s: float = 900.0
    n_pulses: int = 10_000_000

    def problems(self) -> list[tuple[str, str]]:
        out = []
        out += self.transmitter.problems("transmitter")
        out += self.channel.problems("channel")
        out += self.receiver.problems("receiver")
        out += self.security.problems("security")
        if not (isinstance(self.seed, int) and 0 <= self.seed <= MAX_SEED):
            out.append(("seed", "must be an unsigned 64-bit integer"))
        if not (self.duration_s > 0 and math.isfinite(self.duration_s)):
            out.append(("duration_s", "must be a positive finite number of seconds"))
        if not (isinstance(self.n_pulses, int) and self.n_pulses >= 1):
            out.append(("n_pulses", "must be an integer >= 1"))
        return out

    def with_updates(self, **sections) -> "ExperimentConfig":
        """Replace fields; nested sections accept dicts of field overrides."""
        kwargs = {}
        for name, value in sections.items():
            current = getattr(self, name)
            if isinstance(value, dict) and dataclasses.is_dataclass(current):
                nested = {}
                for k, v in value.items():
                    sub = getattr(current, k)
                    nested[k] = dataclasses.replace(sub, **v) if isinstance(v, dict) else v
                value = dataclasses.replace(current, **nested)
            kwargs[name] = value
        return dataclasses.replace(self, **kwargs)


def validate(config: ExperimentConfig) -> None:
    problems = config.problems()
    if problems:
        raise ConfigError(problems)


def _coerce(tp, value, path: str, problems: list):
    origin = typing.get_origin(tp)
    if origin is typing.Union or origin is types.UnionType:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(args[0], value, path, problems)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            problems.append((path, "expected a mapping"))
            return None
        return _build(tp, value, path, problems)
    if isinstance(tp, type) and issubclass(tp, Enum):
        try:
            return tp(value)
        except ValueError:
            problems.append((path, f"must be one of {[m.value for m in tp]}"))
            return None
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            if isinstance(value, str):
                try:
                    return float(value)
                except ValueError:
                    pass
            problems.append((path, "expected a number"))
            return None
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append((path, "expected an integer"))
            return None
        return value
    return value


def _build(cls, data: dict, path: str, problems: list):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if key not in names:
            problems.append((sub, "unknown field"))
            continue
        coerced = _coerce(hints[key], value, sub, problems)
        if coerced is not None or value is None:
            kwargs[key] = coerced
    try:
        return cls(**kwargs)
    except TypeError as exc:
        problems.append((path or "<root>", str(exc)))
        return None


def config_from_dict(data: dict | None) -> ExperimentConfig:
    problems: list[tuple[str, str]] = []
    cfg = _build(ExperimentConfig, data or {}, "", problems)
    if problems:
        raise ConfigError(problems)
    validate(cfg)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([("<file>", f"cannot read {path}: {exc.strerror or exc}")]) from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([("<file>", f"not valid YAML: {exc}")]) from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError([("<root>", "expected a mapping")])
    return config_from_dict(data)


def _plain(value):
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    return value


def config_to_dict(config: ExperimentConfig) -> dict:
    return _plain(config)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)


__all__ = [
    "ExperimentConfig",
    "TransmitterConfig",
    "DriverModel",
    "ModulatorMode",
    "ChannelConfig",
    "ReceiverConfig",
    "SecurityParams",
    "validate",
    "load_config",
    "config_from_dict",
    "config_to_dict",
    "dump_config",
]
