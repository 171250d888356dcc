"""Training loop, batch sampling and the metrics log."""

from app.training.config import TrainConfig
from app.training.metrics import EpochSummary, MetricsLog, StepMetrics, read_metrics
from app.training.sampling import PairBatch, sample_pairs
from app.training.trainer import TrainResult, Trainer, train

__all__ = [
    "EpochSummary",
    "MetricsLog",
    "PairBatch",
    "StepMetrics",
    "TrainConfig",
    "TrainResult",
    "Trainer",
    "read_metrics",
    "sample_pairs",
    "train",
]
