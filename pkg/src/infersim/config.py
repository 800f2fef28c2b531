"""JSON config loading shared by the catalog, hardware, workload and scenario files."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """A config file failed to parse or validate."""


def parse_json_text(text: str, source: str = "<string>") -> Any:
    if not text.strip():
        return {}
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise ConfigError(
            f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {context}"
        ) from exc


def load_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_json_text(text, str(path))


def load_preset(name: str) -> Any:
    """Load one of the JSON files bundled under ``infersim/presets``."""
    text = resources.files("infersim").joinpath("presets").joinpath(name).read_text()
    return parse_json_text(text, f"presets/{name}")


def require(table: dict, key: str, where: str) -> Any:
    if key not in table:
        raise ConfigError(f"{where}: missing field '{key}'")
    return table[key]


def check_fields(table: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}")
