"""Configuration: defaults overridden by a hierarchy of JSON files, with
command-line flags taking precedence over all of them.

Layer order (later wins): built-in defaults, system file, user file, local
file (working directory or --config), command-line flags.  File locations
follow platform conventions and can be redirected through environment
variables, which the tests use.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Dict, Optional

SYSTEM_CONFIG_ENV = "VEIL_SITE_CONFIG"
USER_CONFIG_ENV = "VEIL_USER_CONFIG"
CHAIN_FILE_ENV = "VEIL_CHAIN_FILE"
DATA_DIR_ENV = "VEIL_DATA_DIR"

LOCAL_CONFIG_NAME = "veil.config.json"


class ConfigError(Exception):
    pass


@dataclass
class Config:
    crypto_backend: str = "dummy"
    chain_backend: str = "mock"
    hash_threshold: int = 10
    hash_mode: str = "concat"
    prime: str = "bn254"
    data_dir: str = ""
    chain_file: str = ""
    trace: bool = False

    def resolved_data_dir(self) -> str:
        if self.data_dir:
            return self.data_dir
        if os.environ.get(DATA_DIR_ENV):
            return os.environ[DATA_DIR_ENV]
        base = os.environ.get("XDG_DATA_HOME",
                              os.path.join(os.path.expanduser("~"), ".local", "share"))
        return os.path.join(base, "veil")

    def resolved_chain_file(self) -> str:
        if os.environ.get(CHAIN_FILE_ENV):
            return os.environ[CHAIN_FILE_ENV]
        if self.chain_file:
            return self.chain_file
        return os.path.join(self.resolved_data_dir(), "chain.json")

    def validate(self):
        from .sha256gadget import HASH_MODES
        from .field import PRIMES
        if self.hash_mode not in HASH_MODES:
            raise ConfigError(f"unknown hash mode {self.hash_mode!r}")
        if self.prime not in PRIMES:
            raise ConfigError(f"unknown field prime id {self.prime!r}")
        if self.hash_threshold < 0:
            raise ConfigError("hash threshold must be non-negative")
        if self.crypto_backend == "dummy" and self.chain_backend != "mock":
            raise ConfigError(
                "dummy encryption is only allowed with the local mock chain")


def system_config_path() -> str:
    return os.environ.get(SYSTEM_CONFIG_ENV, "/etc/veil/config.json")


def user_config_path() -> str:
    if os.environ.get(USER_CONFIG_ENV):
        return os.environ[USER_CONFIG_ENV]
    base = os.environ.get("XDG_CONFIG_HOME",
                          os.path.join(os.path.expanduser("~"), ".config"))
    return os.path.join(base, "veil", "config.json")


def _read_layer(path: str) -> Dict:
    if not path or not os.path.exists(path):
        return {}
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: configuration must be a JSON object")
    known = {f.name for f in dataclasses.fields(Config)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{path}: unknown setting {key!r}")
    return data


def load_config(overrides: Optional[Dict] = None,
                local_path: Optional[str] = None) -> Config:
    """Effective configuration = defaults + system + user + local + flags."""
    layers = [
        _read_layer(system_config_path()),
        _read_layer(user_config_path()),
        _read_layer(local_path if local_path is not None
                    else (LOCAL_CONFIG_NAME if os.path.exists(LOCAL_CONFIG_NAME) else "")),
        {k: v for k, v in (overrides or {}).items() if v is not None},
    ]
    merged: Dict = {}
    for layer in layers:
        merged.update(layer)
    cfg = Config(**merged)
    cfg.validate()
    return cfg
