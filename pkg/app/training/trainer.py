"""
Training loop with gradient routing around the mixing layer.

Per step, on a batch of inputs I_in, targets I_t and a subspace index m:

- reconstruction: I_out = decode(encode(I_in)), never touching A (L_a, L_g)
- mixing: swap subspace m of the target's sources into the input's and
  decode (L_m); trains encoder, decoder and A
- entropy: classify the subspaces of to_sources(stop_gradient(z_in)) (L_e);
  trains A, the heads and the classifier only

then one Adam step on the weighted total and a refresh of A^-1.
"""

from __future__ import annotations

import copy
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from app.core.errors import ConfigurationError, DivergedTrainingError
from app.core.logging import get_logger, run_logger
from app.core.provenance import provenance_record
from app.losses.mixing import MixSpec, mix_sources
from app.losses.terms import (
    EntropyResult,
    LossTerms,
    entropy_loss,
    gradient_loss,
    mask_loss,
    recon_loss,
    total_loss,
)
from app.model.checkpoint import save_checkpoint
from app.model.layout import SubspaceLayout
from app.model.networks import SubspaceAutoencoder
from app.synthdata.dataset import SpriteDataset
from app.tensor import ops
from app.tensor.optim import AdamState, adam_step
from app.tensor.tensor import Graph
from app.training.config import TrainConfig
from app.training.metrics import EpochSummary, MetricsLog, StepMetrics
from app.training.sampling import PairBatch, sample_pairs

logger = get_logger(__name__)

METRICS_FILE = "metrics.jsonl"
FINAL_CHECKPOINT = "final.sdck"
LAST_GOOD_CHECKPOINT = "last_good.sdck"

ProgressCallback = Callable[[StepMetrics], None]


@dataclass
class TrainResult:
    model: SubspaceAutoencoder
    optimizer: AdamState
    history: list[StepMetrics] = field(default_factory=list)
    epochs: list[EpochSummary] = field(default_factory=list)
    final_checkpoint: Path | None = None
    metrics_path: Path | None = None


def run_provenance(config: TrainConfig) -> dict:
    """Provenance of a run; independent of where the dataset file lives."""
    return provenance_record(
        "train", config.model_dump(mode="json", exclude={"dataset_path"}), seed=config.seed
    )


class Trainer:
    """
    Owns the model and optimizer state of one run.

    Attributes:
        config: Run hyperparameters
        dataset: Training sprites
        model: The autoencoder being trained
        state: Adam state
    """

    def __init__(
        self,
        config: TrainConfig,
        dataset: SpriteDataset,
        model: SubspaceAutoencoder | None = None,
    ) -> None:
        if len(dataset) < config.batch_size:
            raise ConfigurationError(
                f"Dataset has {len(dataset)} sprites, batch size is {config.batch_size}",
                dataset_size=len(dataset),
                batch_size=config.batch_size,
            )
        self.config = config
        self.dataset = dataset
        self.layout = SubspaceLayout.from_dims(config.dims)
        init_rng = np.random.default_rng([config.seed, 0])
        self.model = model or SubspaceAutoencoder.initialize(
            self.layout, init_rng, isa_enabled=config.enable_isa
        )
        if self.model.layout != self.layout or self.model.isa_enabled != config.enable_isa:
            raise ConfigurationError("Model architecture does not match the training config")
        self.sample_rng = np.random.default_rng([config.seed, 1])
        self.state = AdamState()
        self.weights = config.effective_weights()
        self.step_count = 0

    @property
    def steps_per_epoch(self) -> int:
        return self.config.steps_per_epoch or len(self.dataset) // self.config.batch_size

    def sample(self) -> PairBatch:
        return sample_pairs(
            len(self.dataset), self.config.batch_size, self.sample_rng, self.layout.num_subspaces
        )

    def compute_losses(self, batch: PairBatch) -> tuple[LossTerms, float]:
        """
        Forward pass of all three paths; must run inside an active Graph to
        record gradients.

        Returns:
            The loss terms and the subspace-classification accuracy
        """
        model = self.model
        x_in = self.dataset.images_chw(batch.inputs)
        x_t = self.dataset.images_chw(batch.targets)
        mask_in = self.dataset.masks[batch.inputs, batch.m]
        mask_t = self.dataset.masks[batch.targets, batch.m]

        z_in = model.encode(x_in)
        x_out = model.decode(z_in)
        l_a = recon_loss(x_in, x_out)
        l_g = gradient_loss(x_in, x_out)

        s_in = model.to_sources(z_in)
        s_t = model.to_sources(model.encode(x_t))
        s_mix = mix_sources([s_in, s_t], MixSpec.select(batch.m), self.layout)
        x_mix = model.decode(model.to_latent(s_mix))
        l_m = mask_loss(x_mix, x_in, x_t, mask_in, mask_t)

        entropy = entropy_loss(
            model.to_sources(ops.stop_gradient(z_in)), model, return_accuracy=True
        )
        assert isinstance(entropy, EntropyResult)
        return LossTerms(L_a=l_a, L_g=l_g, L_m=l_m, L_e=entropy.loss), entropy.accuracy

    def train_step(self, batch: PairBatch, epoch: int = 0) -> StepMetrics:
        """
        One optimization step.

        Raises:
            DivergedTrainingError: On a non-finite loss term or gradient, or an
                ill-conditioned A after the update
        """
        self.model.zero_grad()
        with Graph() as graph:
            terms, accuracy = self.compute_losses(batch)
            total = total_loss(terms, self.weights)
        if total.requires_grad:
            graph.backward(total)

        grads = {name: p.grad for name, p in self.model.params.items()}
        adam_step(
            self.model.params,
            grads,
            self.state,
            self.config.lr,
            self.config.beta1,
            self.config.beta2,
            self.config.eps,
        )
        self.model.refresh_inverse()
        self.step_count += 1

        values = terms.as_floats()
        return StepMetrics(
            step=self.step_count,
            epoch=epoch,
            m=batch.m,
            L_a=values["L_a"],
            L_g=values["L_g"],
            L_m=values["L_m"],
            L_e=values["L_e"],
            total=total.item(),
            accuracy=accuracy,
        )

    def _snapshot(self) -> tuple[dict[str, np.ndarray], AdamState, int]:
        params = {name: p.data.copy() for name, p in self.model.params.items()}
        return params, copy.deepcopy(self.state), self.step_count

    def _restore(self, snapshot: tuple[dict[str, np.ndarray], AdamState, int]) -> None:
        params, state, step_count = snapshot
        for name, data in params.items():
            tensor = self.model.params[name]
            tensor.data = data
            tensor.version += 1
        self.state = state
        self.step_count = step_count
        self.model.refresh_inverse()

    def save(self, path: Path, epoch: int) -> Path:
        metadata = {
            "epoch": epoch,
            "step": self.step_count,
            "provenance": run_provenance(self.config),
        }
        out = save_checkpoint(self.model, path, optimizer=self.state, metadata=metadata)
        run_logger.log_checkpoint_saved(str(out), self.step_count, epoch=epoch)
        return out

    def fit(
        self,
        out_dir: Path | None = None,
        progress: ProgressCallback | None = None,
    ) -> TrainResult:
        """
        Run every epoch, writing metrics and checkpoints under ``out_dir``.

        On divergence the parameters from before the failing step are
        restored and saved as ``last_good.sdck`` before the error propagates.
        """
        out = Path(out_dir) if out_dir is not None else None
        metrics_path = out / METRICS_FILE if out is not None else None
        result = TrainResult(model=self.model, optimizer=self.state, metrics_path=metrics_path)
        provenance = run_provenance(self.config)
        run_logger.log_run_started(
            provenance["fingerprint"],
            self.config.seed,
            epochs=self.config.epochs,
            steps_per_epoch=self.steps_per_epoch,
            architecture=self.model.architecture,
        )

        with MetricsLog(metrics_path) as metrics_log:
            for epoch in range(1, self.config.epochs + 1):
                epoch_steps: list[StepMetrics] = []
                for _ in range(self.steps_per_epoch):
                    batch = self.sample()
                    snapshot = self._snapshot()
                    try:
                        metrics = self.train_step(batch, epoch)
                    except DivergedTrainingError as e:
                        self._restore(snapshot)
                        run_logger.log_training_diverged(
                            self.step_count + 1, e.message, epoch=epoch, details=e.context
                        )
                        if out is not None:
                            self.save(out / LAST_GOOD_CHECKPOINT, epoch)
                        raise
                    metrics_log.append(metrics)
                    result.history.append(metrics)
                    epoch_steps.append(metrics)
                    if progress is not None:
                        progress(metrics)

                summary = EpochSummary.from_steps(epoch, epoch_steps)
                result.epochs.append(summary)
                run_logger.log_epoch_finished(
                    epoch,
                    summary.median_l_a,
                    mean_total=summary.mean_total,
                    mean_accuracy=summary.mean_accuracy,
                )
                interval = self.config.checkpoint_interval
                if out is not None and interval and epoch % interval == 0:
                    self.save(out / f"epoch_{epoch:04d}.sdck", epoch)

        result.optimizer = self.state
        if out is not None:
            result.final_checkpoint = self.save(out / FINAL_CHECKPOINT, self.config.epochs)
        return result


def train(
    config: TrainConfig,
    dataset: SpriteDataset,
    out_dir: Path | None = None,
    progress: ProgressCallback | None = None,
) -> TrainResult:
    """Train a fresh model on ``dataset``; see ``Trainer.fit``."""
    return Trainer(config, dataset).fit(out_dir, progress)
