"""
Experiment configuration: defaults, preset, TOML file, CLI flags, environment.

Later sources win: defaults < preset < file < CLI flags < ``CDS_CALIB_SEED``.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import typing
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 backport
    import tomli as tomllib

from src.common.errors import ConfigError
from src.models.experiment import ExperimentConfig
from src.pipeline.presets import get_preset

LOGGER = logging.getLogger(__name__)

SEED_ENV = "CDS_CALIB_SEED"

_BOOL_HELP = {
    "circular_phase": "Measure phase distance on the circle",
    "train_only_pool": "Draw SOLID candidates from training windows only",
    "ablation": "Also evaluate every selection mode on the test split",
}


def flag_name(key: str) -> str:
    """Config key → CLI flag (``lambda_t`` → ``--lambda-t``)."""
    return "--" + key.replace("_", "-")


def _field_types() -> Dict[str, Any]:
    hints = typing.get_type_hints(ExperimentConfig)
    return {item.name: hints[item.name] for item in fields(ExperimentConfig)}


def _coerce_scalar(key: str, value: Any, kind: type) -> Any:
    if kind is bool:
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"'{key}' expects a boolean, got '{value}'")
    try:
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind is float:
            return float(value)
        return str(value)
    except (TypeError, ValueError) as error:
        raise ConfigError(f"'{key}' expects {kind.__name__}, got '{value}'") from error


def coerce_value(key: str, value: Any) -> Any:
    """Convert a raw file or CLI value to the type of config field ``key``."""
    types = _field_types()
    if key not in types:
        raise ConfigError(f"Unknown config key '{key}'")
    hint = types[key]
    args = typing.get_args(hint)

    if typing.get_origin(hint) is typing.Union:
        if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "null")):
            return None
        hint = next(arg for arg in args if arg is not type(None))
        args = typing.get_args(hint)

    if typing.get_origin(hint) is tuple:
        items = value.split(",") if isinstance(value, str) else value
        if not isinstance(items, (list, tuple)):
            items = [items]
        return tuple(_coerce_scalar(key, item, args[0]) for item in items if str(item).strip() != "")
    return _coerce_scalar(key, value, hint)


def load_config_file(path: Path | str) -> Dict[str, Any]:
    """Read a flat TOML file into coerced config values."""
    path = Path(path)
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError as error:
        raise ConfigError(f"Config file not found: {path}") from error
    except tomllib.TOMLDecodeError as error:
        raise ConfigError(f"Invalid TOML in {path}: {error}") from error
    nested = [key for key, value in raw.items() if isinstance(value, dict)]
    if nested:
        raise ConfigError(f"Config must be flat; found tables {nested} in {path}")
    return {key: coerce_value(key, value) for key, value in raw.items()}


def load_config(path: Path | str) -> ExperimentConfig:
    """Defaults, the file's preset (if any), then the file itself."""
    return build_config(file_values=load_config_file(path), environ={})


def build_config(
    file_values: Optional[Mapping[str, Any]] = None,
    cli_values: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> ExperimentConfig:
    """
    Merge every configuration source.

    Args:
        file_values: Coerced values from a config file
        cli_values: Coerced values from CLI flags (None entries are ignored)
        environ: Environment (defaults to ``os.environ``)

    Returns:
        A validated ExperimentConfig
    """
    file_values = dict(file_values or {})
    cli_values = {key: value for key, value in (cli_values or {}).items() if value is not None}
    environ = os.environ if environ is None else environ

    merged: Dict[str, Any] = {}
    preset_name = cli_values.get("preset", file_values.get("preset"))
    if preset_name:
        preset = get_preset(preset_name)
        merged.update(preset.config_values())
        merged["preset"] = preset.name
        merged["dataset"] = preset.name
        LOGGER.debug("Applied preset %s", preset.name)
    merged.update(file_values)
    merged.update(cli_values)

    seed = environ.get(SEED_ENV)
    if seed is not None and seed.strip():
        merged["seed"] = coerce_value("seed", seed)
        LOGGER.info("Seed overridden by %s=%s", SEED_ENV, seed)

    return ExperimentConfig(**merged)


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """Add ``--config`` and one flag per config key (lists comma-separated, booleans bare)."""
    parser.add_argument("--config", type=Path, help="Flat TOML config file")
    for key, hint in _field_types().items():
        if hint is bool:
            parser.add_argument(flag_name(key), dest=key, action=argparse.BooleanOptionalAction, default=None,
                                help=_BOOL_HELP.get(key, f"Set '{key}'"))
            continue
        parser.add_argument(flag_name(key), dest=key, default=None, metavar=key.upper(),
                            help=f"Override '{key}' ({_describe(hint)})")


def _describe(hint: Any) -> str:
    if isinstance(hint, type):
        return hint.__name__
    return str(hint).replace("typing.", "")


def config_from_args(args: argparse.Namespace, environ: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    """Build the config for parsed CLI arguments."""
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    cli_values = {
        key: coerce_value(key, getattr(args, key))
        for key in ExperimentConfig.keys()
        if getattr(args, key, None) is not None
    }
    return build_config(file_values=file_values, cli_values=cli_values, environ=environ)
