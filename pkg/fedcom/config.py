"""
Run configuration files.

Config files are YAML mappings. Keys may be nested sections or dotted paths,
and both forms can be mixed:

    rule: fedcom
    rounds: 30
    attack.kind: gaussian
    attack.byzantine_fraction: 0.3
    train:
      learning_rate: 0.01

`null` (or `none`) means "not set". Values are validated by pydantic into a RunConfig.
"""

import logging
import os
from typing import Any, Dict, Mapping, Optional

import yaml
from pydantic import ValidationError

from fedcom.errors import ConfigError
from fedcom.graph_state import RunConfig

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "FEDCOM_SEED"


def _set_dotted(target: Dict[str, Any], key: str, value: Any, origin: str) -> None:
    parts = str(key).split(".")
    if not all(parts):
        raise ConfigError(f"{origin}: invalid key '{key}'")
    node = target
    for depth, part in enumerate(parts[:-1]):
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"{origin}: '{'.'.join(parts[: depth + 1])}' is a value, not a section")
        node = child
    leaf = parts[-1]
    if isinstance(node.get(leaf), dict):
        raise ConfigError(f"{origin}: '{key}' is a section, not a value")
    node[leaf] = value


def _is_set(target: Mapping[str, Any], key: str) -> bool:
    node: Any = target
    for part in key.split("."):
        if not isinstance(node, Mapping) or part not in node:
            return False
        node = node[part]
    return True


def _merge(target: Dict[str, Any], values: Mapping[Any, Any], prefix: str) -> None:
    for key, value in values.items():
        path = f"{prefix}{key}"
        if isinstance(value, Mapping):
            _merge(target, value, f"{path}.")
        else:
            if isinstance(value, str) and value.strip().lower() == "none":
                value = None
            # `attack.kind` and a nested `attack: {kind: ...}` name the same field
            if _is_set(target, path):
                raise ConfigError(f"duplicate key '{path}'")
            _set_dotted(target, path, value, f"key '{path}'")


def parse_config_text(text: str) -> Dict[str, Any]:
    """
    Parse a YAML config document into a nested dict, expanding dotted keys.

    Raises:
        ConfigError: If the text is not YAML, is not a mapping, or sets a key twice
    """
    try:
        loaded = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"cannot parse config{where}: {e}") from e
    if loaded is None:
        return {}
    if not isinstance(loaded, Mapping):
        raise ConfigError(f"config must be a mapping of keys to values, got {type(loaded).__name__}")

    result: Dict[str, Any] = {}
    _merge(result, loaded, "")
    return result


def _format_validation_error(error: ValidationError) -> str:
    problems = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<config>"
        problems.append(f"{path}: {item['msg']}")
    return "invalid configuration: " + "; ".join(problems)


def build_config(values: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Validate a nested mapping, after applying dotted-key overrides, into a RunConfig.

    Raises:
        ConfigError: With dotted field paths for every validation problem
    """
    merged = _deep_copy(values)
    for key, value in (overrides or {}).items():
        _set_dotted(merged, key, value, "override")
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from e


def _deep_copy(values: Mapping[str, Any]) -> Dict[str, Any]:
    return {key: _deep_copy(value) if isinstance(value, Mapping) else value for key, value in values.items()}


def with_overrides(cfg: RunConfig, overrides: Mapping[str, Any]) -> RunConfig:
    """Re-validated copy of cfg with dotted-key overrides applied."""
    return build_config(cfg.model_dump(mode="json"), overrides)


def load_config(path: str, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Load a YAML configuration file.

    Precedence, lowest first: file, FEDCOM_SEED environment variable, explicit overrides.

    Args:
        path: Path to the YAML config file
        overrides: Dotted keys set on top of the file (e.g. from CLI flags)

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: If the file can't be read, parsed or validated
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e

    values = parse_config_text(text)
    layered: Dict[str, Any] = {}
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None and env_seed.strip():
        logger.info(f"Using seed {env_seed.strip()} from {SEED_ENV_VAR}")
        layered["seed"] = env_seed.strip()
    layered.update(overrides or {})
    return build_config(values, layered)
