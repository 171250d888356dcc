"""
End-to-end training and evaluation on the full synthetic dataset.

These runs take minutes; they are marked ``slow`` and skipped by default.
Run with ``pytest -m slow``.
"""

from pathlib import Path

import numpy as np
import pytest

from app.eval.attributes import (
    attribute_direction,
    attribute_edit,
    attribute_separation,
    classifier_accuracy,
)
from app.eval.mixing import mixing_error
from app.model.checkpoint import decode_checkpoint, encode_checkpoint
from app.synthdata.dataset import SpriteDataset
from app.synthdata.dataset_io import decode_dataset, encode_dataset
from app.synthdata.generator import GenParams, generate
from app.training.config import TrainConfig
from app.training.metrics import StepMetrics
from app.training.trainer import FINAL_CHECKPOINT, METRICS_FILE, Trainer, TrainResult, train

pytestmark = [pytest.mark.integration, pytest.mark.slow]

MIXING_GROUPS = 200
EDIT_STRENGTH = 2.0


@pytest.fixture(scope="module")
def sprites() -> SpriteDataset:
    return generate(GenParams(seed=7, count=4096))


@pytest.fixture(scope="module")
def held_out() -> SpriteDataset:
    """Sprites from another seed, never seen in training."""
    return generate(GenParams(seed=8, count=512))


@pytest.fixture(scope="module")
def isa_run(sprites: SpriteDataset, tmp_path_factory: pytest.TempPathFactory) -> TrainResult:
    return train(TrainConfig(seed=0), sprites, tmp_path_factory.mktemp("isa"))


@pytest.fixture(scope="module")
def ablation_run(sprites: SpriteDataset, tmp_path_factory: pytest.TempPathFactory) -> TrainResult:
    return train(TrainConfig(seed=0, enable_isa=False), sprites, tmp_path_factory.mktemp("no_isa"))


class TestMixingAlgebra:
    """The mixing inverse stays accurate throughout a run."""

    def test_identity_error_after_every_step(self, sprites: SpriteDataset) -> None:
        """Test ||A A^-1 - I||_max <= 1e-4 after each of 100 steps."""
        config = TrainConfig(seed=2, epochs=1, batch_size=4, steps_per_epoch=100)
        trainer = Trainer(config, sprites.subset(range(256)))
        errors: list[float] = []

        def check(_: StepMetrics) -> None:
            assert trainer.model.mixing is not None
            errors.append(trainer.model.mixing.identity_error())

        trainer.fit(progress=check)
        assert len(errors) == 100
        assert max(errors) <= 1e-4

        z = np.random.default_rng(0).standard_normal((16, 32)).astype(np.float32)
        back = trainer.model.to_latent(trainer.model.to_sources(z)).data
        assert np.abs(back - z).max() <= 1e-4 * np.abs(z).max()


class TestTrainingSmoke:
    """Default-config training converges."""

    def test_reconstruction_improves(self, isa_run: TrainResult) -> None:
        """Test the last epoch's median L_a is at most a fifth of the first."""
        first, last = isa_run.epochs[0], isa_run.epochs[-1]
        assert last.median_l_a <= 0.2 * first.median_l_a

    def test_classifier_beats_chance(self, isa_run: TrainResult, held_out: SpriteDataset) -> None:
        """Test subspace classification accuracy on held-out sprites above 0.5 (chance is 0.2)."""
        assert classifier_accuracy(isa_run.model, held_out) > 0.5


class TestAblation:
    """The decomposition lowers the mixing error."""

    def test_isa_has_lower_mixing_error(
        self, isa_run: TrainResult, ablation_run: TrainResult, sprites: SpriteDataset
    ) -> None:
        """Test lower e_j in at least four of five subspaces and in the mean."""
        with_isa = mixing_error(isa_run.model, sprites, MIXING_GROUPS, seed=0)
        without = mixing_error(ablation_run.model, sprites, MIXING_GROUPS, seed=0)
        pairs = zip(with_isa.per_subspace, without.per_subspace)
        lower = sum(a < b for a, b in pairs if a is not None and b is not None)
        assert lower >= 4
        assert with_isa.mean is not None and without.mean is not None
        assert with_isa.mean < without.mean


class TestSeparationPattern:
    """Attributes separate in the subspace of their part."""

    def test_local_attributes(self, isa_run: TrainResult, sprites: SpriteDataset) -> None:
        """Test mouth_open peaks in mouth and pale_skin in face."""
        analysis = attribute_separation(isa_run.model, sprites)
        assert analysis.argmax_subspace("mouth_open") == "mouth"
        assert analysis.argmax_subspace("pale_skin") == "face"

    def test_correlated_attribute_spreads(self, isa_run: TrainResult, sprites: SpriteDataset) -> None:
        """Test dark_hair, coupled with thick eyebrows, separates in two or more subspaces."""
        distances = attribute_separation(isa_run.model, sprites).distances()
        values = np.array([per_attr["dark_hair"] for per_attr in distances.values()])
        assert int(np.sum(values >= 0.25 * values.max())) >= 2


class TestAttributeEditing:
    """Editing along a class-mean direction changes the attribute's own part."""

    def test_mouth_open_edit_stays_in_the_mouth(
        self, isa_run: TrainResult, sprites: SpriteDataset, held_out: SpriteDataset
    ) -> None:
        """Test the mean change inside the mouth mask is at least 3x the mean change outside."""
        model = isa_run.model
        direction = attribute_direction(model, sprites, "mouth_open")
        closed = np.flatnonzero(~held_out.attribute("mouth_open"))[:20]
        inside, outside = [], []
        for index in closed:
            image = held_out.images_chw([index])[0]
            before = attribute_edit(model, sprites, "mouth_open", image, 0.0, direction=direction)
            after = attribute_edit(
                model, sprites, "mouth_open", image, EDIT_STRENGTH, direction=direction
            )
            change = np.abs(after - before).mean(axis=0)
            mouth = held_out.masks[index, 4]
            inside.append(float((change * mouth).sum() / mouth.sum()))
            outside.append(float((change * (1.0 - mouth)).sum() / (1.0 - mouth).sum()))
        assert np.mean(inside) >= 3.0 * np.mean(outside)


class TestDeterminism:
    """Fixed seeds reproduce every artifact."""

    def test_runs_are_byte_identical(self, sprites: SpriteDataset, tmp_path: Path) -> None:
        """Test datasets, checkpoints and metrics logs."""
        payload = encode_dataset(sprites.subset(range(64)))
        assert encode_dataset(generate(GenParams(seed=7, count=64))) == payload
        assert encode_dataset(decode_dataset(payload)) == payload

        config = TrainConfig(seed=4, epochs=1, batch_size=8, steps_per_epoch=5)
        data = decode_dataset(payload)
        train(config, data, tmp_path / "a")
        train(config, data, tmp_path / "b")
        for name in (FINAL_CHECKPOINT, METRICS_FILE):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

        checkpoint = (tmp_path / "a" / FINAL_CHECKPOINT).read_bytes()
        loaded = decode_checkpoint(checkpoint)
        assert encode_checkpoint(loaded.model, loaded.optimizer, loaded.metadata) == checkpoint
