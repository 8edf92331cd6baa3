"""Run configuration: ``section.key = value`` text files plus overrides.

Every dataclass field is addressable as ``section.field``; unknown keys are
errors.  The resolved configuration is written next to every run's outputs.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

from .composer import ComposerConfig
from .dueling_dqn import TrainConfig
from .geom2d_sim import LidarSpec
from .rewards import AvoidRewardConfig, GoalRewardConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    episodes: int = 100
    max_steps: int = 500
    noise: bool = False
    jitter_pos: float = 0.15
    jitter_heading: float = 0.3
    goal_model: str = ""
    avoid_model: str = ""
    min_success_rate: float = 0.0


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    out: str = "runs/latest"
    scenario: str = "open_corner"
    mode: str = "daac"


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    goal_train: TrainConfig = field(default_factory=TrainConfig.goal)
    avoid_train: TrainConfig = field(default_factory=TrainConfig.avoidance)
    goal_reward: GoalRewardConfig = field(default_factory=GoalRewardConfig)
    avoid_reward: AvoidRewardConfig = field(default_factory=AvoidRewardConfig)
    composer: ComposerConfig = field(default_factory=ComposerConfig)
    lidar: LidarSpec = field(default_factory=LidarSpec)
    eval: EvalConfig = field(default_factory=EvalConfig)


SECTIONS = [f.name for f in dataclasses.fields(RunConfig)]


def _coerce(raw: str, current: Any, path: str):
    raw = raw.strip()
    try:
        if isinstance(current, bool):
            low = raw.lower()
            if low in ("1", "true", "on", "yes"):
                return True
            if low in ("0", "false", "off", "no"):
                return False
            raise ValueError(raw)
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, tuple):
            return tuple(float(t) for t in raw.replace(",", " ").split())
        return raw
    except ValueError:
        raise ConfigError(f"{path}: cannot parse {raw!r} as {type(current).__name__}") from None


def apply_overrides(cfg: RunConfig, items: Iterable[tuple[str, str]]) -> RunConfig:
    """Apply ``(section.key, raw value)`` pairs in order; later pairs win."""
    pending: dict[str, dict[str, Any]] = {}
    for path, raw in items:
        if "." not in path:
            raise ConfigError(f"{path}: keys must look like section.key")
        section, key = path.split(".", 1)
        if section not in SECTIONS:
            raise ConfigError(f"{path}: unknown section {section!r}")
        sect = getattr(cfg, section)
        names = [f.name for f in dataclasses.fields(sect)]
        if key not in names:
            raise ConfigError(f"{path}: unknown key {key!r} in section {section!r}")
        pending.setdefault(section, {})[key] = _coerce(raw, getattr(sect, key), path)
    updates = {}
    for section, kv in pending.items():
        try:
            updates[section] = dataclasses.replace(getattr(cfg, section), **kv)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{section}: {exc}") from None
    return dataclasses.replace(cfg, **updates)


def parse_config_text(text: str) -> list[tuple[str, str]]:
    items = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, value = line.split("=", 1)
        items.append((key.strip(), value.strip()))
    return items


def parse_override(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like section.key=value")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def load_config(path: Optional[str] = None, overrides: Iterable[tuple[str, str]] = ()) -> RunConfig:
    cfg = RunConfig()
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        cfg = apply_overrides(cfg, parse_config_text(text))
    return apply_overrides(cfg, overrides)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return " ".join(repr(float(t)) for t in v)
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for section in SECTIONS:
        sect = getattr(cfg, section)
        for f in dataclasses.fields(sect):
            lines.append(f"{section}.{f.name} = {_fmt(getattr(sect, f.name))}")
    return "\n".join(lines) + "\n"
