"""Configuration for ringsolve runs and benchmarks."""

import os
import sys
from pathlib import Path
from typing import Any, Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_PREFIX = "RINGSOLVE_"

# TOML sections flattened to "<section>_<key>" field names
SECTIONS = ("solver", "grid", "bench", "oracle", "hss", "logging")

# Cache for config file path
_config_file_path: Optional[Path] = None


def find_config_file() -> Optional[Path]:
    """Find configuration file in standard locations.

    Search order:
    1. RINGSOLVE_CONFIG environment variable
    2. ./ringsolve.toml (current directory)
    3. ~/.config/ringsolve/ringsolve.toml (user config)
    4. /etc/ringsolve/ringsolve.toml (system config)
    """
    env_config = os.environ.get(f"{ENV_PREFIX}CONFIG")
    if env_config:
        path = Path(env_config)
        if path.exists():
            return path

    locations = [
        Path("ringsolve.toml"),
        Path.home() / ".config" / "ringsolve" / "ringsolve.toml",
        Path("/etc/ringsolve/ringsolve.toml"),
    ]

    for path in locations:
        if path.exists():
            return path

    return None


def load_toml_config() -> dict[str, Any]:
    """Load configuration from TOML file, flattened for pydantic-settings."""
    global _config_file_path

    config_path = find_config_file()
    if not config_path:
        _config_file_path = None
        return {}

    _config_file_path = config_path

    with open(config_path, "rb") as f:
        config = tomllib.load(f)

    flat: dict[str, Any] = {}
    for section in SECTIONS:
        for key, value in config.get(section, {}).items():
            flat[f"{section}_{key}"] = value

    return flat


def get_config_file_path() -> Optional[Path]:
    """Get the path to the configuration file being used.

    Returns absolute path if config file was found, None otherwise.
    """
    if _config_file_path:
        return _config_file_path.resolve()
    return None


class Settings(BaseSettings):
    """Run settings with environment variable and TOML support."""

    # Solver settings
    solver_eps: float = Field(default=1e-7, gt=0, description="HSS truncation accuracy")
    solver_leaf_max: int = Field(default=64, ge=1, description="Largest HSS leaf block")

    # Grid generator settings
    grid_cond_low: float = Field(default=1.0, gt=0, description="Lower conductivity bound")
    grid_cond_high: float = Field(default=2.0, gt=0, description="Upper conductivity bound")

    # Benchmark settings
    bench_sizes: list[int] = Field(default=[50, 100], description="Grid sizes m")
    bench_seeds: list[int] = Field(default=[1], description="Grid generator seeds")
    bench_apply_repeats: int = Field(
        default=3, ge=1, description="Repetitions timed for boundary operator application"
    )

    # Oracle settings
    oracle_cap: int = Field(
        default=200, ge=0, description="Largest m for the dense e1/e2 oracle"
    )
    oracle_cg_cap: int = Field(
        default=700, ge=0, description="Largest m for the conjugate-gradient e3/e4 oracle"
    )
    oracle_cg_tol: float = Field(default=1e-12, gt=0, description="CG relative residual")
    oracle_cg_maxiter_factor: int = Field(
        default=20, ge=1, description="CG iteration cap as a multiple of m"
    )
    oracle_power_iterations: int = Field(
        default=50, ge=1, description="Power iterations for the e2 estimate"
    )
    oracle_power_rtol: float = Field(
        default=1e-3, gt=0, description="Relative convergence of the e2 estimate"
    )

    # Densification guard for HSS matrices
    hss_densify_cap: int = Field(default=8192, ge=1, description="Largest densified HSS size")

    logging_level: str = Field(default="INFO", description="Logging level")

    model_config = {
        "env_prefix": ENV_PREFIX,
        "env_file": ".env",
        "extra": "ignore",
    }

    def __init__(self, **kwargs: Any) -> None:
        # Load TOML config as defaults
        toml_config = load_toml_config()

        # Environment variables override TOML config
        for key, value in toml_config.items():
            env_key = f"{ENV_PREFIX}{key.upper()}"
            if env_key not in os.environ and key not in kwargs:
                kwargs[key] = value

        super().__init__(**kwargs)

    @field_validator("bench_sizes")
    @classmethod
    def sizes_must_be_even(cls, v: list[int]) -> list[int]:
        bad = [m for m in v if m < 2 or m % 2]
        if bad:
            raise ValueError(f"grid sizes must be even and >= 2, got {bad}")
        return v

    @field_validator("logging_level")
    @classmethod
    def known_level(cls, v: str) -> str:
        level = v.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown logging level {v!r}")
        return level
