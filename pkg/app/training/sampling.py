"""Batch sampling for the training loop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.core.errors import ConfigurationError


@dataclass(frozen=True)
class PairBatch:
    """Indices of the input and target sprites of one step and the swapped subspace."""

    inputs: np.ndarray
    targets: np.ndarray
    m: int


def sample_pairs(
    dataset_size: int,
    batch_size: int,
    rng: np.random.Generator,
    num_subspaces: int = 5,
) -> PairBatch:
    """
    Draw B inputs and an independent set of B targets, both without
    replacement, plus a uniformly drawn subspace index.

    A target may coincide with its input; no derangement is enforced.

    Raises:
        ConfigurationError: If the dataset holds fewer than ``batch_size`` sprites
    """
    if batch_size < 1 or dataset_size < batch_size:
        raise ConfigurationError(
            f"Cannot draw batches of {batch_size} from {dataset_size} sprites",
            dataset_size=dataset_size,
            batch_size=batch_size,
        )
    inputs = rng.choice(dataset_size, size=batch_size, replace=False)
    targets = rng.choice(dataset_size, size=batch_size, replace=False)
    m = int(rng.integers(num_subspaces))
    return PairBatch(inputs=inputs, targets=targets, m=m)
