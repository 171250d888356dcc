"""
Configuration management using Pydantic Settings.

Loads process-wide settings from environment variables (or a .env file) with
validation and type safety. Experiment configs (GenParams, TrainConfig, ...)
live next to the code that consumes them; this module only carries the knobs
shared by every command.
"""

from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.errors import ConfigurationError, MissingFileError


class Settings(BaseSettings):
    """
    Application settings loaded from environment variables.

    All settings are loaded from .env file or environment variables.
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = Field(default="subspace-ae", description="Application name")
    app_env: Literal["development", "staging", "production"] = Field(
        default="production", description="Environment"
    )
    log_level: str = Field(default="INFO", description="Logging level")
    log_format: Literal["json", "text"] = Field(default="json", description="Log format")

    # Numerics
    dtype: Literal["float32", "float64"] = Field(
        default="float32", description="Real precision of the tensor core"
    )
    eval_chunk_size: int = Field(
        default=256, gt=0, description="Batch size for no-grad forward passes"
    )


def load_config_file(path: Path) -> dict[str, Any]:
    """
    Load a JSON/YAML config file into a plain dictionary.

    JSON is a subset of YAML, so both parse through yaml.safe_load.

    Raises:
        MissingFileError: If the file does not exist
        ConfigurationError: If the file is not a mapping
    """
    config_path = Path(path)
    if not config_path.exists():
        raise MissingFileError(f"Config file not found: {config_path}", path=str(config_path))

    with open(config_path, "r", encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Config file is not valid JSON/YAML: {e}") from e

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(
            f"Config file must contain a mapping, got {type(data).__name__}",
            path=str(config_path),
        )
    return data


# Global settings instance
settings = Settings()
