"""
Run configuration files.

A run config bundles the generator, training and evaluation settings of an
experiment. Files are JSON (or YAML) mirroring the field names below;
command-line flags override file values and unknown keys are rejected.
"""

from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from app.core.config import load_config_file
from app.core.errors import ConfigurationError
from app.synthdata.generator import GenParams
from app.training.config import TrainConfig


class EvalOptions(BaseModel):
    """Options of the evaluation commands."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    groups: int = Field(default=200, ge=1, description="Mixing-error groups")
    seed: int = Field(default=0, ge=0, description="Seeds group selection")
    strength: float = Field(default=2.0, description="Attribute edit strength")


class RunConfig(BaseModel):
    """Generator, training and evaluation settings of one experiment."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    gen: GenParams = Field(default_factory=GenParams)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalOptions = Field(default_factory=EvalOptions)


def _merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _drop_unset(overrides: dict[str, Any]) -> dict[str, Any]:
    cleaned: dict[str, Any] = {}
    for key, value in overrides.items():
        if isinstance(value, dict):
            nested = _drop_unset(value)
            if nested:
                cleaned[key] = nested
        elif value is not None:
            cleaned[key] = value
    return cleaned


def build_run_config(data: dict[str, Any], overrides: dict[str, Any] | None = None) -> RunConfig:
    """
    Validate a config mapping after applying flag overrides.

    Override values of None mean "flag not given" and are ignored.

    Raises:
        ConfigurationError: If validation fails (unknown keys, bad values)
    """
    merged = _merge(data, _drop_unset(overrides or {}))
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigurationError(f"Invalid run config: {problems}") from e


def load_run_config(path: Path | None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Load a run config file (or the defaults when ``path`` is None) plus overrides."""
    data = load_config_file(path) if path is not None else {}
    return build_run_config(data, overrides)
