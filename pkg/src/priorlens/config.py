"""Validated run configuration for the command-line driver."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .attention import AttentionConfig
from .refiner import RefinerConfig
from .synth import SceneSpec


class ConfigError(ValueError):
    pass


def _build(cls, data: Any, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be a JSON object")
    if cls is SceneSpec:
        try:
            return SceneSpec.from_dict(data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}: {exc}") from exc
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{section}: unknown keys {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    channels: int = 16
    attention_frames: int = 10
    feature_noise: float = 0.05
    scene: SceneSpec = field(default_factory=lambda: SceneSpec(class_corruption_rate=0.2))
    refiner: RefinerConfig = field(default_factory=RefinerConfig)
    attention: AttentionConfig = field(default_factory=AttentionConfig)
    report: str | None = None
    svg: str | None = None

    _SECTIONS = {"scene": SceneSpec, "refiner": RefinerConfig, "attention": AttentionConfig}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key in cls._SECTIONS:
                kwargs[key] = _build(cls._SECTIONS[key], value, key)
            else:
                kwargs[key] = value
        for key in ("seed", "channels", "attention_frames"):
            if key in kwargs and (not isinstance(kwargs[key], int) or isinstance(kwargs[key], bool)):
                raise ConfigError(f"{key} must be an integer")
        if kwargs.get("channels", 1) < 1 or kwargs.get("attention_frames", 2) < 2:
            raise ConfigError("channels must be >= 1 and attention_frames >= 2")
        if "feature_noise" in kwargs and not isinstance(kwargs["feature_noise"], (int, float)):
            raise ConfigError("feature_noise must be a number")
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from exc
        return cls.from_dict(data)
