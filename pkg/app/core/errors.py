"""
Exception hierarchy shared by every pipeline stage.

Each error carries a machine-readable code and the process exit code the CLI
reports for it.
"""

from typing import Any


class PipelineError(Exception):
    """Base exception for pipeline errors."""

    code = "error"
    exit_code = 1

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.context = context


class ConfigurationError(PipelineError):
    """Raised for invalid configuration, options or layouts."""

    code = "invalid_config"
    exit_code = 3


class ShapeError(ConfigurationError):
    """Raised when tensor shapes do not conform for an operation."""

    code = "shape_mismatch"


class MissingFileError(PipelineError):
    """Raised when a referenced input file does not exist."""

    code = "missing_file"
    exit_code = 2


class FormatError(PipelineError):
    """Raised when a binary file does not match its declared format."""

    code = "format_error"


class DatasetFormatError(FormatError):
    """Raised for malformed sprite dataset files."""

    code = "dataset_format"


class CheckpointFormatError(FormatError):
    """Raised for malformed checkpoint files."""

    code = "checkpoint_format"


class GenerationError(PipelineError):
    """Raised when the sprite generator cannot produce a valid sample."""

    code = "generation_failed"


class GraphError(PipelineError):
    """Raised on misuse of the autodiff graph."""

    code = "graph_error"


class DivergedTrainingError(PipelineError):
    """Raised when training produces non-finite values."""

    code = "diverged"
    exit_code = 4


class IllConditionedMixingError(DivergedTrainingError):
    """Raised when the mixing matrix can no longer be inverted reliably."""

    code = "ill_conditioned_mixing"
