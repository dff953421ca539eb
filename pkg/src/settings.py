"""
Toolkit Configuration
"""

import logging
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path("config/toolkit_config.yaml")


class LoggingSettings(BaseModel):
    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class EstimationSettings(BaseModel):
    demean_tol: float = Field(1e-10, gt=0)
    demean_max_sweeps: int = Field(10_000, ge=1)
    pvalue_dist: Literal["normal", "t"] = "normal"
    cluster_df: Literal["conventional", "min"] = "conventional"


class SpatialSettings(BaseModel):
    optimizer_tol: float = Field(1e-8, gt=0)
    audit_points: int = Field(1000, ge=10)
    restart_grid: int = Field(5, ge=1)
    impact_draws: int = Field(1000, ge=100)


class FactorSettings(BaseModel):
    max_iter: int = Field(500, ge=1)
    tol: float = Field(1e-7, gt=0)
    d_max: int = Field(8, ge=0, le=8)


class TypologySettings(BaseModel):
    k_max: int = Field(8, ge=2)
    gap_refs: int = Field(100, ge=50)
    k: int = Field(3, ge=1)


class DiagnosticsSettings(BaseModel):
    permutation_draws: int = Field(999, ge=1)
    warn_pvalue: float = Field(0.05, gt=0, lt=1)


class RandomSettings(BaseModel):
    seed: int = Field(20020101, ge=0)


class ToolkitSettings(BaseSettings):
    """Toolkit settings; YAML values first, PANELTK_* environment variables on top."""

    model_config = SettingsConfigDict(env_prefix="PANELTK_", env_nested_delimiter="__")

    logging: LoggingSettings = LoggingSettings()
    estimation: EstimationSettings = EstimationSettings()
    spatial: SpatialSettings = SpatialSettings()
    factors: FactorSettings = FactorSettings()
    typology: TypologySettings = TypologySettings()
    diagnostics: DiagnosticsSettings = DiagnosticsSettings()
    random: RandomSettings = RandomSettings()

    @classmethod
    def settings_customise_sources(
        cls, settings_cls, init_settings, env_settings, dotenv_settings, file_secret_settings
    ):
        return env_settings, init_settings


def _load_config(config_path: Union[str, Path]) -> dict:
    """Load configuration from YAML file."""
    try:
        config_file = Path(config_path)
        if config_file.exists():
            with open(config_file, 'r') as f:
                return yaml.safe_load(f) or {}
    except Exception as e:
        logger.warning(f"Could not load config from {config_path}: {e}")
    return {}


def load_settings(config_path: Optional[Union[str, Path]] = None) -> ToolkitSettings:
    """
    Build settings from a YAML file and the environment.

    Args:
        config_path: Path to the YAML file; defaults to config/toolkit_config.yaml

    Returns:
        Validated settings
    """
    return ToolkitSettings(**_load_config(config_path or DEFAULT_CONFIG_PATH))


def configure_logging(settings: ToolkitSettings) -> None:
    """Configure root logging once for a command-line run."""
    logging.basicConfig(
        level=getattr(logging, settings.logging.level.upper(), logging.INFO),
        format=settings.logging.format,
    )
