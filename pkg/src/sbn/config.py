"""Flat ``section.key = value`` configuration files.

Every key maps onto one field of the dataclasses that make up
:class:`~sbn.sim.SimConfig`.  Absent keys keep their defaults, ``#`` starts a
comment, and ``auto`` stands for a parameter that is derived at run time.
"""
from __future__ import annotations

import dataclasses
import enum
import math
import typing
from dataclasses import replace

from .channel import ChannelParams
from .consensus import ConsensusConfig
from .services import ServiceParams
from .sim import (
    ConfigError,
    LedgerConfig,
    ReputationConfig,
    ScenarioConfig,
    ShardingConfig,
    SimConfig,
)

# section name -> (SimConfig attribute, dataclass)
SECTIONS = {
    "sim": ("scenario", ScenarioConfig),
    "channel": ("channel", ChannelParams),
    "consensus": ("consensus", ConsensusConfig),
    "sharding": ("sharding", ShardingConfig),
    "services": ("services", ServiceParams),
    "ledger": ("ledger", LedgerConfig),
    "reputation": ("reputation", ReputationConfig),
}
# keys that live on SimConfig itself but are filed under a section
TOP_LEVEL = {"sim.penalty_distance": "penalty_distance"}
# fields set by something else (the protocol follows sim.variant)
HIDDEN = {"consensus.mode"}
AUTO = "auto"


class ParseError(ConfigError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class UnknownKey(ConfigError):
    def __init__(self, name: str):
        super().__init__(f"unknown key {name!r}")
        self.name = name


class InvalidValue(ConfigError):
    def __init__(self, key: str, msg: str = ""):
        super().__init__(f"invalid value for {key}" + (f": {msg}" if msg else ""))
        self.key = key


def _field_types(cls) -> dict:
    return typing.get_type_hints(cls)


def _unwrap_optional(tp):
    args = typing.get_args(tp)
    if args and type(None) in args:
        rest = [a for a in args if a is not type(None)]
        return rest[0], True
    return tp, False


def known_keys() -> dict:
    """Full key -> (section attribute or None, field name, python type)."""
    out = {}
    for sec, (attr, cls) in SECTIONS.items():
        hints = _field_types(cls)
        for f in dataclasses.fields(cls):
            if f"{sec}.{f.name}" not in HIDDEN:
                out[f"{sec}.{f.name}"] = (attr, f.name, hints[f.name])
    hints = _field_types(SimConfig)
    for key, name in TOP_LEVEL.items():
        out[key] = (None, name, hints[name])
    return out


def convert(key: str, raw: str, tp):
    base, optional = _unwrap_optional(tp)
    if optional and raw.lower() in (AUTO, "none"):
        return None
    try:
        if isinstance(base, type) and issubclass(base, enum.Enum):
            return base(raw.lower())
        if base is int:
            return int(raw)
        if base is float:
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError("must be finite")
            return val
    except ValueError as exc:
        raise InvalidValue(key, str(exc)) from exc
    raise InvalidValue(key, f"unsupported type {base!r}")


def parse_config(text: str) -> SimConfig:
    keys = known_keys()
    seen: dict[str, int] = {}
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(lineno, "expected 'key = value'")
        key, _, raw = body.partition("=")
        key, raw = key.strip(), raw.strip()
        if not key or not raw:
            raise ParseError(lineno, "empty key or value")
        if key in seen:
            raise ParseError(lineno, f"{key} already set on line {seen[key]}")
        if key not in keys:
            raise UnknownKey(key)
        seen[key] = lineno
        values[key] = convert(key, raw, keys[key][2])
    return build(values, keys)


def build(values: dict, keys: dict | None = None) -> SimConfig:
    keys = keys or known_keys()
    parts, top = {}, {}
    for sec, (attr, cls) in SECTIONS.items():
        kw = {keys[k][1]: v for k, v in values.items() if keys[k][0] == attr}
        try:
            parts[attr] = cls(**kw)
        except ValueError as exc:
            # name the first key that fails on its own, else the whole section
            culprit = next((f"{sec}.{n}" for n, v in kw.items() if not _accepts(cls, n, v)), sec)
            raise InvalidValue(culprit, str(exc)) from exc
    for k, v in values.items():
        if keys[k][0] is None:
            top[keys[k][1]] = v
    if top.get("penalty_distance") is not None and top["penalty_distance"] < 0:
        raise InvalidValue("sim.penalty_distance", "must be >= 0")
    return SimConfig(**parts, **top)


def _accepts(cls, name, value) -> bool:
    try:
        cls(**{name: value})
    except ValueError:
        return False
    return True


def _fmt(v) -> str:
    if v is None:
        return AUTO
    if isinstance(v, enum.Enum):
        return str(v.value)
    return repr(v)


def serialize(cfg: SimConfig) -> str:
    """Every key, one per line, in section then field order."""
    lines = []
    for sec, (attr, cls) in SECTIONS.items():
        obj = getattr(cfg, attr)
        for f in dataclasses.fields(cls):
            if f"{sec}.{f.name}" in HIDDEN:
                continue
            lines.append(f"{sec}.{f.name} = {_fmt(getattr(obj, f.name))}")
        if sec == "sim":
            for key, name in TOP_LEVEL.items():
                lines.append(f"{key} = {_fmt(getattr(cfg, name))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def override(cfg: SimConfig, **scenario_kw) -> SimConfig:
    """Apply CLI overrides (``seed``, ``runs``...) that are not None."""
    kw = {k: v for k, v in scenario_kw.items() if v is not None}
    if not kw:
        return cfg
    try:
        return replace(cfg, scenario=replace(cfg.scenario, **kw))
    except ValueError as exc:
        raise InvalidValue("sim." + ",".join(sorted(kw)), str(exc)) from exc
