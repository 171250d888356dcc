"""
Chunked no-grad forward passes over a dataset.

No Graph is active here, so nothing is recorded and memory stays bounded
by the chunk size.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from app.core.config import settings
from app.core.errors import ConfigurationError
from app.model.networks import SubspaceAutoencoder
from app.synthdata.dataset import SpriteDataset
from app.tensor.tensor import Tensor


def map_chunks(
    fn: Callable[[np.ndarray], Tensor],
    inputs: np.ndarray,
    chunk_size: int | None = None,
) -> np.ndarray:
    """
    Apply ``fn`` to consecutive chunks of ``inputs`` and stack the results.

    Raises:
        ConfigurationError: If ``inputs`` is empty
    """
    if len(inputs) == 0:
        raise ConfigurationError("No-grad forward pass over an empty input")
    size = chunk_size or settings.eval_chunk_size
    parts = [fn(inputs[start : start + size]).data for start in range(0, len(inputs), size)]
    return np.concatenate(parts, axis=0)


def sources_all(model: SubspaceAutoencoder, dataset: SpriteDataset) -> np.ndarray:
    """Source vectors (N, d) of every sprite."""
    return map_chunks(lambda x: model.to_sources(model.encode(x)), dataset.images_chw())


def chw_to_hwc(images: np.ndarray) -> np.ndarray:
    return np.moveaxis(images, -3, -1)
