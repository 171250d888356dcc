"""
Structured logging configuration with JSON output.

Numpy scalars and arrays passed through ``extra`` are converted to plain JSON
values so training metrics can be logged without manual casting.
"""

import logging
import sys
from typing import Any

import numpy as np
from pythonjsonlogger import jsonlogger

from app.core.config import settings

_STANDARD_ATTRS = frozenset(
    logging.LogRecord("", 0, "", 0, "", None, None).__dict__.keys()
) | {"message", "asctime"}


def to_jsonable(value: Any) -> Any:
    """Convert numpy values (recursively) into JSON-serializable Python values."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


class ArrayAwareJsonFormatter(jsonlogger.JsonFormatter):
    """
    JSON formatter that understands numpy values in extra fields.
    """

    def process_log_record(self, log_record: dict[str, Any]) -> dict[str, Any]:
        """Convert numpy values before serialization."""
        return {key: to_jsonable(value) for key, value in log_record.items()}


class TextFormatter(logging.Formatter):
    """
    Simple text formatter for development/console output.

    Extra fields are appended as ``key=value`` pairs.
    """

    def format(self, record: logging.LogRecord) -> str:
        """Format log record with its extra fields."""
        base = super().format(record)
        extras = {
            key: to_jsonable(value)
            for key, value in record.__dict__.items()
            if key not in _STANDARD_ATTRS and not key.startswith("_")
        }
        if not extras:
            return base
        return base + " " + " ".join(f"{key}={value}" for key, value in extras.items())


class StderrHandler(logging.StreamHandler):  # type: ignore[type-arg]
    """Stream handler bound to whatever ``sys.stderr`` is at emit time."""

    @property  # type: ignore[override]
    def stream(self) -> Any:
        return sys.stderr

    @stream.setter
    def stream(self, value: Any) -> None:
        pass


def setup_logging() -> None:
    """
    Configure application-wide logging.

    Sets up structured JSON logging or text logging depending on settings.
    Respects LOG_LEVEL and LOG_FORMAT from settings.
    """
    log_level = getattr(logging, settings.log_level.upper(), logging.INFO)

    # Root logger configuration
    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # Remove existing handlers
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    # Logs go to stderr so stdout stays free for command output
    console_handler = StderrHandler()
    console_handler.setLevel(log_level)

    formatter: logging.Formatter
    if settings.log_format == "json":
        formatter = ArrayAwareJsonFormatter(
            fmt="%(asctime)s %(name)s %(levelname)s %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
    else:
        formatter = TextFormatter(
            fmt="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )

    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    root_logger.debug(
        "Logging configured",
        extra={
            "log_level": settings.log_level,
            "log_format": settings.log_format,
            "environment": settings.app_env,
            "app": settings.app_name,
        },
    )


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance for a specific module.

    Args:
        name: Logger name (usually __name__)

    Returns:
        Configured logger instance
    """
    return logging.getLogger(name)


class RunLogger:
    """
    Specialized logger for pipeline events.

    Every record carries an ``event`` field so runs can be reconstructed from
    the log stream alone.
    """

    def __init__(self, logger_name: str = "run") -> None:
        self.logger = logging.getLogger(logger_name)

    def log_dataset_written(self, path: str, count: int, fingerprint: str, **kwargs: Any) -> None:
        """Log a generated dataset file."""
        self.logger.info(
            "Dataset written",
            extra={
                "event": "dataset_written",
                "path": path,
                "count": count,
                "fingerprint": fingerprint,
                **kwargs,
            },
        )

    def log_run_started(self, fingerprint: str, seed: int, **kwargs: Any) -> None:
        """Log the start of a training run."""
        self.logger.info(
            "Training run started",
            extra={"event": "run_started", "fingerprint": fingerprint, "seed": seed, **kwargs},
        )

    def log_epoch_finished(self, epoch: int, median_l_a: float, **kwargs: Any) -> None:
        """Log an epoch summary."""
        self.logger.info(
            "Epoch finished",
            extra={"event": "epoch_finished", "epoch": epoch, "median_l_a": median_l_a, **kwargs},
        )

    def log_checkpoint_saved(self, path: str, step: int, **kwargs: Any) -> None:
        """Log a checkpoint write."""
        self.logger.info(
            "Checkpoint saved",
            extra={"event": "checkpoint_saved", "path": path, "step": step, **kwargs},
        )

    def log_training_diverged(self, step: int, reason: str, **kwargs: Any) -> None:
        """Log an aborted training run."""
        self.logger.error(
            "Training diverged",
            extra={"event": "training_diverged", "step": step, "reason": reason, **kwargs},
        )

    def log_report_written(self, kind: str, path: str, **kwargs: Any) -> None:
        """Log an evaluation report."""
        self.logger.info(
            "Report written",
            extra={"event": "report_written", "kind": kind, "path": path, **kwargs},
        )

    def log_image_written(self, kind: str, path: str, **kwargs: Any) -> None:
        """Log an exported image."""
        self.logger.info(
            "Image written",
            extra={"event": "image_written", "kind": kind, "path": path, **kwargs},
        )

    def log_error(self, event: str, error: Exception, **kwargs: Any) -> None:
        """Log error with context."""
        self.logger.error(
            f"Error in {event}",
            extra={
                "event": event,
                "error_type": type(error).__name__,
                "error_message": str(error),
                **kwargs,
            },
            exc_info=True,
        )


# Global run logger instance
run_logger = RunLogger()
