"""
Training configuration.
"""

from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.losses.terms import LossWeights
from app.model.layout import DEFAULT_DIMS


class TrainConfig(BaseModel):
    """
    Hyperparameters of one training run.

    Field names double as the keys of the ``train`` section of a run config
    file; unknown keys are rejected.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = Field(default=0, ge=0, description="Seeds initialization and batch sampling")
    epochs: int = Field(default=30, ge=1)
    batch_size: int = Field(default=32, ge=2, description="Mask loss needs input/target pairs")
    steps_per_epoch: int | None = Field(
        default=None, ge=1, description="Defaults to dataset size // batch size"
    )
    lr: float = Field(default=2e-4, gt=0.0)
    beta1: float = Field(default=0.5, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    weights: LossWeights = Field(default_factory=LossWeights)
    enable_isa: bool = Field(default=True, description="False = no-decomposition ablation")
    dims: tuple[int, ...] = Field(default=DEFAULT_DIMS, description="Subspace sizes")
    checkpoint_interval: int = Field(
        default=5, ge=0, description="Epochs between checkpoints; 0 keeps only the final one"
    )
    dataset_path: Path | None = None

    @field_validator("dims")
    @classmethod
    def validate_dims(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if not v or any(d <= 0 for d in v):
            raise ValueError(f"dims must be positive, got {list(v)}")
        return v

    def effective_weights(self) -> LossWeights:
        """Weights actually used: the ablation has no entropy term."""
        if self.enable_isa:
            return self.weights
        return self.weights.model_copy(update={"lambda4": 0.0})
