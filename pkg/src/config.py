#!/usr/bin/env python3

import os
import configparser
import re
from pathlib import Path
from typing import Dict, Any, Optional, Tuple

try:
    from dotenv import load_dotenv
except ImportError:  # pragma: no cover
    load_dotenv = None

from .wos import WosConfig

CONFIG_FILE_NAME = ".hmlabrc"

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "sampling": {
        "eps": 1e-4,
        "samples": 100000,
        "seed": 0,
        "batch": 4096,
        "max_steps": 1000000,
        "workers": 1,
    },
    "output": {
        "format": "csv",
        "use_color": True,
        "confidence": 0.99,
    },
}

# Environment variable -> (section, key)
ENV_OVERRIDES = {
    "HMLAB_SEED": ("sampling", "seed"),
    "HMLAB_SAMPLES": ("sampling", "samples"),
    "HMLAB_EPS": ("sampling", "eps"),
    "HMLAB_WORKERS": ("sampling", "workers"),
}

_INT_PATTERN = re.compile(r"^[+-]?\d+$")


def coerce_value(value: str) -> Any:
    """Convert a string from the rc file or the environment to bool, int, float or str."""
    text = value.strip()
    if text.lower() in ("true", "yes"):
        return True
    if text.lower() in ("false", "no"):
        return False
    if _INT_PATTERN.match(text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text


def get_config_path() -> Path:
    """Get the path to the configuration file."""
    # Check for config in the current directory first
    local_config = Path(CONFIG_FILE_NAME)
    if local_config.exists():
        return local_config

    # Then check in the user's home directory
    return Path.home() / CONFIG_FILE_NAME


def load_config() -> Dict[str, Dict[str, Any]]:
    """Load configuration from defaults, the rc file and environment variables."""
    config: Dict[str, Dict[str, Any]] = {
        section: dict(values) for section, values in DEFAULTS.items()
    }

    config_path = get_config_path()
    if config_path.exists():
        parser = configparser.ConfigParser()
        parser.read(config_path)

        for section in parser.sections():
            config.setdefault(section, {})
            for key, value in parser.items(section):
                config[section][key] = coerce_value(value)

    if load_dotenv is not None:
        load_dotenv()

    for name, (section, key) in ENV_OVERRIDES.items():
        if name in os.environ:
            config[section][key] = coerce_value(os.environ[name])

    if "HMLAB_NO_COLOR" in os.environ:
        config["output"]["use_color"] = False

    return config


def save_config(config: Dict[str, Dict[str, Any]], path: Optional[Path] = None) -> None:
    """Save configuration to file."""
    if path is None:
        path = get_config_path()

    parser = configparser.ConfigParser()
    for section, values in config.items():
        parser[section] = {key: str(value) for key, value in values.items()}

    with open(path, "w") as f:
        parser.write(f)


def set_config_value(section: str, key: str, value: str) -> Tuple[bool, str]:
    """Set a configuration value.

    Returns:
        Tuple[bool, str]: (success, message)
    """
    config = load_config()

    if section not in DEFAULTS:
        return False, f"Invalid section: {section}"
    if key not in DEFAULTS[section]:
        return False, f"Unknown key '{key}' in section '{section}'"

    config[section][key] = coerce_value(value)

    try:
        save_config(config)
        return True, f"Set {section}.{key} = {value}"
    except Exception as e:
        return False, f"Failed to save configuration: {e}"


def get_config_value(section: str, key: str) -> Tuple[Optional[Any], str]:
    """Get a configuration value.

    Returns:
        Tuple[Optional[Any], str]: (value, message)
    """
    config = load_config()

    if section not in config:
        return None, f"Invalid section: {section}"

    if key not in config[section]:
        return None, f"Key '{key}' not found in section '{section}'"

    value = config[section][key]
    return value, f"{section}.{key} = {value}"


def list_config() -> Dict[str, Dict[str, Any]]:
    """List all configuration values."""
    return load_config()


def wos_config_from(config: Dict[str, Dict[str, Any]], **overrides: Any) -> WosConfig:
    """Build a WosConfig from the [sampling] section; non-None overrides win."""
    sampling = dict(config.get("sampling", {}))
    for key, value in overrides.items():
        if value is not None:
            sampling[key] = value
    return WosConfig(
        eps=float(sampling["eps"]),
        max_steps=int(sampling["max_steps"]),
        samples=int(sampling["samples"]),
        seed=int(sampling["seed"]),
        batch=int(sampling["batch"]),
        workers=int(sampling["workers"]),
    )
