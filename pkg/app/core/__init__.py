"""Core application modules."""

from app.core.config import settings
from app.core.errors import (
    ConfigurationError,
    DivergedTrainingError,
    MissingFileError,
    PipelineError,
    ShapeError,
)
from app.core.logging import get_logger, run_logger, setup_logging
from app.core.provenance import fingerprint, provenance_record

__all__ = [
    "settings",
    "get_logger",
    "setup_logging",
    "run_logger",
    "fingerprint",
    "provenance_record",
    "PipelineError",
    "ConfigurationError",
    "ShapeError",
    "MissingFileError",
    "DivergedTrainingError",
]
