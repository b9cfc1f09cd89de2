"""Configuration loading: YAML defaults plus environment overrides."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import yaml
from dotenv import load_dotenv

from .errors import ConfigError

logger = logging.getLogger(__name__)

PACKAGE_ROOT = Path(__file__).resolve().parent
DEFAULT_CONFIG_PATH = PACKAGE_ROOT / "config" / "global.yaml"

ENV_BUDGET = "KATETOV_LEVEL_BUDGET"
ENV_LOG_LEVEL = "KATETOV_LOG_LEVEL"
ENV_CONFIG = "KATETOV_CONFIG"

DEFAULT_LEVEL_BUDGET = 50_000


@dataclass(frozen=True)
class KatetovConfig:
    """Runtime knobs loaded from YAML."""

    # Tower
    level_budget: int = DEFAULT_LEVEL_BUDGET
    default_depth: int = 2

    # Structures
    iso_size_cap: int = 9
    extension_size_cap: int = 9

    # Pushout
    cocone_extra: int = 0
    generic_k_size_cap: int = 5

    # Metric
    default_q: int = 2
    sphere_size_cap: int = 4
    sphere_q_cap: int = 4

    # Limits / Bergman
    search_margin: int = 1
    max_chain_depth: int = 4

    # Logging / CLI
    log_level: str = "INFO"
    log_format: str = "%(asctime)s [%(levelname)s] %(message)s"
    jobs: int = 1
    report_suffix: str = ".report.json"

    @classmethod
    def from_yaml(cls, path: Path) -> KatetovConfig:
        """Load configuration from YAML file."""
        try:
            with path.open(encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config root must be a mapping: {path}")

        config = cls(
            level_budget=data.get("tower", {}).get("level_budget", DEFAULT_LEVEL_BUDGET),
            default_depth=data.get("tower", {}).get("default_depth", 2),
            iso_size_cap=data.get("structures", {}).get("iso_size_cap", 9),
            extension_size_cap=data.get("structures", {}).get("extension_size_cap", 9),
            cocone_extra=data.get("pushout", {}).get("cocone_extra", 0),
            generic_k_size_cap=data.get("pushout", {}).get("generic_k_size_cap", 5),
            default_q=data.get("metric", {}).get("default_q", 2),
            sphere_size_cap=data.get("metric", {}).get("sphere_size_cap", 4),
            sphere_q_cap=data.get("metric", {}).get("sphere_q_cap", 4),
            search_margin=data.get("limits", {}).get("search_margin", 1),
            max_chain_depth=data.get("bergman", {}).get("max_chain_depth", 4),
            log_level=str(data.get("logging", {}).get("level", "INFO")),
            log_format=data.get("logging", {}).get("format", "%(asctime)s [%(levelname)s] %(message)s"),
            jobs=data.get("cli", {}).get("jobs", 1),
            report_suffix=data.get("cli", {}).get("report_suffix", ".report.json"),
        )
        config.check()
        return config

    def check(self) -> None:
        for name in ("level_budget", "iso_size_cap", "extension_size_cap", "jobs", "default_q", "max_chain_depth"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.cocone_extra < 0 or self.search_margin < 0:
            raise ConfigError("cocone_extra and search_margin must be non-negative")

    def with_env_overrides(self) -> KatetovConfig:
        """Apply KATETOV_* environment variables on top of this config."""
        updated = self
        raw_budget = os.getenv(ENV_BUDGET)
        if raw_budget:
            try:
                budget = int(raw_budget)
            except ValueError as exc:
                raise ConfigError(f"{ENV_BUDGET} must be an integer, got {raw_budget!r}") from exc
            if budget <= 0:
                raise ConfigError(f"{ENV_BUDGET} must be positive, got {budget}")
            logger.info("Level budget overridden from environment: %s", budget)
            updated = replace(updated, level_budget=budget)
        raw_level = os.getenv(ENV_LOG_LEVEL)
        if raw_level:
            if raw_level.upper() not in logging.getLevelNamesMapping():
                raise ConfigError(f"{ENV_LOG_LEVEL} is not a logging level: {raw_level!r}")
            updated = replace(updated, log_level=raw_level.upper())
        return updated


def load_config(path: Optional[Path] = None, *, env_file: Optional[Path] = None) -> KatetovConfig:
    """Load YAML defaults, then environment overrides (after reading .env)."""
    if env_file is not None:
        load_dotenv(env_file, override=False)
    else:
        load_dotenv(override=False)
    if path is None:
        env_path = os.getenv(ENV_CONFIG)
        path = Path(env_path) if env_path else DEFAULT_CONFIG_PATH
    config = KatetovConfig.from_yaml(path)
    return config.with_env_overrides()
