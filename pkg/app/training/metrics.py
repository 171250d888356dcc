"""
Per-step metrics and the JSON-lines metrics log.

Each line is one object ``{"step", "L_a", "L_g", "L_m", "L_e", "total"}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any

import numpy as np

LOG_FIELDS = ("step", "L_a", "L_g", "L_m", "L_e", "total")


@dataclass(frozen=True)
class StepMetrics:
    step: int
    epoch: int
    m: int
    L_a: float
    L_g: float
    L_m: float
    L_e: float
    total: float
    accuracy: float

    def to_record(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in LOG_FIELDS}


@dataclass(frozen=True)
class EpochSummary:
    epoch: int
    steps: int
    median_l_a: float
    mean_total: float
    mean_accuracy: float

    @classmethod
    def from_steps(cls, epoch: int, steps: list[StepMetrics]) -> EpochSummary:
        return cls(
            epoch=epoch,
            steps=len(steps),
            median_l_a=float(np.median([s.L_a for s in steps])),
            mean_total=float(np.mean([s.total for s in steps])),
            mean_accuracy=float(np.mean([s.accuracy for s in steps])),
        )


class MetricsLog:
    """Append-only JSON-lines writer; a no-op when no path is given."""

    def __init__(self, path: Path | None) -> None:
        self.path = Path(path) if path is not None else None
        self._handle: IO[str] | None = None

    def __enter__(self) -> MetricsLog:
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = open(self.path, "w", encoding="utf-8")
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def append(self, metrics: StepMetrics) -> None:
        if self._handle is None:
            return
        self._handle.write(json.dumps(metrics.to_record()) + "\n")
        self._handle.flush()


def read_metrics(path: Path) -> list[dict[str, Any]]:
    """Parse a metrics log back into records."""
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
