"""
Pytest configuration and fixtures.
"""

from collections.abc import Iterator

import numpy as np
import pytest

from app.model.layout import SubspaceLayout
from app.model.networks import SubspaceAutoencoder
from app.synthdata.dataset import SpriteDataset
from app.synthdata.generator import GenParams, generate
from app.tensor.tensor import precision
from app.tests.fixtures.gradcheck import PRECISIONS, CheckPrecision
from app.training.config import TrainConfig


@pytest.fixture
def float64() -> Iterator[None]:
    """Run the tensor core in double precision (gradient checks)."""
    with precision("float64"):
        yield


@pytest.fixture(params=PRECISIONS, ids=lambda p: p.dtype)
def check_precision(request: pytest.FixtureRequest) -> Iterator[CheckPrecision]:
    """Gradient checks once in float64 and once in float32."""
    with precision(request.param.dtype):
        yield request.param


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def layout() -> SubspaceLayout:
    """The standard five-part layout (12, 8, 4, 4, 4)."""
    return SubspaceLayout()


@pytest.fixture(scope="session")
def gen_params() -> GenParams:
    return GenParams(seed=7, count=24)


@pytest.fixture(scope="session")
def tiny_dataset(gen_params: GenParams) -> SpriteDataset:
    """24 generated sprites, shared by every test that only reads them."""
    return generate(gen_params)


@pytest.fixture
def model(layout: SubspaceLayout) -> SubspaceAutoencoder:
    """Freshly initialized single-precision model."""
    return SubspaceAutoencoder.initialize(layout, np.random.default_rng(0))


@pytest.fixture
def tiny_train_config() -> TrainConfig:
    """A run short enough for unit tests."""
    return TrainConfig(
        seed=3,
        epochs=2,
        batch_size=4,
        steps_per_epoch=2,
        checkpoint_interval=1,
    )
