"""Configuration management for gbede."""

import json
from pathlib import Path
from typing import Any


CONFIG_DIR = Path.home() / ".config" / "gbede"
CONFIG_FILE = CONFIG_DIR / "config.json"

DEFAULTS: dict[str, Any] = {
    "tolerance": 1e-10,
    "replications": 2000,
    "seed": 20240607,
    "workers": 1,
    "grid_points": 9,
}


def ensure_config_dir():
    """Ensure config directory exists."""
    CONFIG_DIR.mkdir(parents=True, exist_ok=True)


def load_config() -> dict:
    """Load configuration from file.

    Returns:
        The stored settings; empty when the file is missing or unreadable
    """
    if not CONFIG_FILE.exists():
        return {}

    try:
        with open(CONFIG_FILE) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError):
        return {}
    return data if isinstance(data, dict) else {}


def save_config(config: dict):
    """Save configuration to file.

    Args:
        config: Configuration dictionary to save
    """
    ensure_config_dir()
    with open(CONFIG_FILE, "w") as f:
        json.dump(config, f, indent=2)


def effective_config() -> dict:
    """Defaults overlaid with the stored settings."""
    return {**DEFAULTS, **{k: v for k, v in load_config().items() if k in DEFAULTS}}


def get_tolerance() -> float:
    """Root acceptance tolerance on max|F| for estimating equations."""
    return float(effective_config()["tolerance"])


def get_replications() -> int:
    return int(effective_config()["replications"])


def get_seed() -> int:
    return int(effective_config()["seed"])


def get_workers() -> int:
    return int(effective_config()["workers"])


def get_grid_points() -> int:
    return int(effective_config()["grid_points"])


def _parse_setting(key: str, value: Any) -> Any:
    if key == "tolerance":
        parsed = float(value)
        if not 0 < parsed < 1:
            raise ValueError(f"Invalid tolerance: {value}. Must be in (0, 1)")
        return parsed

    parsed = int(value)
    if key == "seed":
        if not 0 <= parsed < 2**64:
            raise ValueError(f"Invalid seed: {value}. Must be a 64-bit unsigned integer")
    elif key == "grid_points":
        if parsed < 2:
            raise ValueError(f"Invalid grid_points: {value}. Must be at least 2")
    elif parsed < 1:
        raise ValueError(f"Invalid {key}: {value}. Must be at least 1")
    return parsed


def set_setting(key: str, value: Any):
    """Validate and store one setting.

    Args:
        key: one of the keys of ``DEFAULTS``
        value: new value, as typed or as a string from the command line

    Raises:
        ValueError: unknown key or invalid value
    """
    if key not in DEFAULTS:
        raise ValueError(f"Unknown setting: {key}. Must be one of: {list(DEFAULTS)}")
    try:
        parsed = _parse_setting(key, value)
    except (TypeError, ValueError) as e:
        if str(e).startswith("Invalid"):
            raise
        raise ValueError(f"Invalid {key}: {value!r}")
    config = load_config()
    config[key] = parsed
    save_config(config)


def reset_setting(key: str | None = None):
    """Drop one stored setting, or all of them, so the default applies."""
    if key is not None and key not in DEFAULTS:
        raise ValueError(f"Unknown setting: {key}. Must be one of: {list(DEFAULTS)}")
    config = load_config()
    if key is None:
        config = {}
    else:
        config.pop(key, None)
    save_config(config)
