"""Plain-text key=value configuration files.

Every runnable surface (CLI subcommands, formulation specs, machine
configs, CSV schema remaps) reads the same format: one ``key=value`` pair
per line, ``#`` starts a comment, blank lines ignored. Values stay
strings; callers convert with the typed getters below.
"""

from __future__ import annotations

import os


class ConfigError(ValueError):
    """Malformed config file or an unknown/invalid key."""


def parse_kv(text: str) -> dict[str, str]:
    """Parse key=value lines into a dict. Later duplicates win."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def read_kv(path: str | os.PathLike) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv(fh.read())


def write_kv(path: str | os.PathLike, items: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in items.items():
            fh.write(f"{key}={value}\n")


def get_int(cfg: dict[str, str], key: str, default: int | None = None) -> int:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected integer, got {cfg[key]!r}") from exc


def get_float(cfg: dict[str, str], key: str, default: float | None = None) -> float:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected number, got {cfg[key]!r}") from exc


def get_floats(cfg: dict[str, str], key: str, default=None):
    """Comma-separated float list."""
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return list(default)
    try:
        return [float(tok) for tok in cfg[key].split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected comma-separated numbers") from exc


def get_bool(cfg: dict[str, str], key: str, default: bool = False) -> bool:
    if key not in cfg:
        return default
    value = cfg[key].lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"key {key!r}: expected boolean, got {cfg[key]!r}")
