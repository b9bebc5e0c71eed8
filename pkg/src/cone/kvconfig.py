"""Flat ``key=value`` text used for config files, snapshots and archive headers."""

from __future__ import annotations

import dataclasses
import typing


class ConfigError(ValueError):
    pass


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ",".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def dumps(d: dict) -> str:
    return "".join(f"{k}={format_value(v)}\n" for k, v in d.items())


def loads(text: str, source: str = "<config>") -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}: line {lineno}: expected key=value")
        key = key.strip()
        if key in out:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _convert(raw: str, tp, key: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or (origin is not None and type(None) in args):
        if raw in ("", "none", "None"):
            return None
        tp = next(a for a in args if a is not type(None))
        origin = typing.get_origin(tp)
    try:
        if tp is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        if tp is tuple or origin is tuple:
            return tuple(int(x) for x in raw.split(",") if x.strip())
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key}") from None


def coerce(cls, raw: dict, strict: bool = True) -> dict:
    """Convert string values to the field types of dataclass ``cls``."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    out = {}
    for key, value in raw.items():
        if key not in names:
            if strict:
                raise ConfigError(f"unknown config key {key!r}")
            continue
        out[key] = _convert(value, hints[key], key) if isinstance(value, str) else value
    return out
