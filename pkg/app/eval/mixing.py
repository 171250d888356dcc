"""
Per-subspace mixing error.

Groups of C sprites are drawn; subspace j of the mixed source vector comes
from sprite j of the group. The decoded mix should reproduce every sprite
inside that sprite's own part mask:

    e_j = sum_xy |I_mix M_jj - I_j M_jj|_rgb-mean / sum_xy M_jj

where M_jj is part mask j of sprite j (soft area in the denominator).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.core.errors import ConfigurationError
from app.core.logging import get_logger
from app.eval.inference import map_chunks
from app.losses.mixing import MixSpec, mix_sources
from app.model.networks import SubspaceAutoencoder
from app.synthdata.dataset import SpriteDataset
from app.tensor.tensor import Tensor

logger = get_logger(__name__)

ZERO_AREA = 1e-8


@dataclass
class MixingErrorReport:
    """
    Attributes:
        per_subspace: Mean e_j over the groups where mask j had area
        groups: Number of groups drawn
        evaluated: Per subspace, how many groups contributed
        subspaces: Subspace names
    """

    per_subspace: list[float | None]
    groups: int
    evaluated: list[int]
    subspaces: list[str] = field(default_factory=list)

    @property
    def mean(self) -> float | None:
        """Mean over evaluated subspaces; None when every subspace was skipped."""
        values = [v for v in self.per_subspace if v is not None]
        return float(np.mean(values)) if values else None

    def to_dict(self) -> dict:
        return {
            "per_subspace": self.per_subspace,
            "groups": self.groups,
            "evaluated_groups": self.evaluated,
            "subspaces": self.subspaces,
            "mean": self.mean,
        }


def draw_groups(dataset_size: int, groups: int, group_size: int, seed: int) -> np.ndarray:
    """(groups, group_size) distinct sprite indices."""
    if groups < 1:
        raise ConfigurationError(f"Need at least one group, got {groups}")
    needed = groups * group_size
    if dataset_size < needed:
        raise ConfigurationError(
            f"Mixing error over {groups} groups needs {needed} sprites, dataset has {dataset_size}",
            groups=groups,
            dataset_size=dataset_size,
        )
    rng = np.random.default_rng(seed)
    return rng.permutation(dataset_size)[:needed].reshape(groups, group_size)


def group_mix_images(model: SubspaceAutoencoder, group_images: np.ndarray) -> np.ndarray:
    """
    Decode multi-way mixes.

    Args:
        group_images: (G, C, 3, H, W) the C source sprites of every group

    Returns:
        (G, 3, H, W) decoded mixes, subspace j taken from sprite j
    """
    num_groups, group_size = group_images.shape[:2]
    layout = model.layout
    spec = MixSpec.multiway(range(group_size))
    flat = group_images.reshape(num_groups * group_size, *group_images.shape[2:])
    sources = map_chunks(lambda x: model.to_sources(model.encode(x)), flat)
    sources = sources.reshape(num_groups, group_size, layout.total_dim)

    def decode_mix(s: np.ndarray) -> Tensor:
        mixed = mix_sources([s[:, j] for j in range(group_size)], spec, layout)
        return model.decode(model.to_latent(mixed))

    return map_chunks(decode_mix, sources)


def masked_errors(
    mixes: np.ndarray,
    sources: np.ndarray,
    masks: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """
    e_j for every group and subspace.

    Args:
        mixes: (G, 3, H, W) decoded mixes
        sources: (G, C, 3, H, W) source images
        masks: (G, C, H, W) part mask j of source j

    Returns:
        (errors (G, C), valid (G, C)); zero-area entries are NaN / False
    """
    diff = np.abs(mixes[:, None].astype(np.float64) - sources.astype(np.float64))
    weighted = (diff * masks[:, :, None]).mean(axis=2)  # mean over RGB
    numerator = weighted.sum(axis=(2, 3))
    area = masks.sum(axis=(2, 3))
    valid = area > ZERO_AREA
    errors = np.full(area.shape, np.nan)
    errors[valid] = numerator[valid] / area[valid]
    return errors, valid


def mixing_error(
    model: SubspaceAutoencoder,
    dataset: SpriteDataset,
    groups: int,
    seed: int,
) -> MixingErrorReport:
    """
    Mean per-subspace mixing error over ``groups`` random groups.

    Masks are the dataset's ground-truth masks. A mask with zero area is
    skipped with a warning.

    Raises:
        ConfigurationError: If the dataset has fewer than C * groups sprites
    """
    layout = model.layout
    num_parts = layout.num_subspaces
    if dataset.masks.shape[1] != num_parts:
        raise ConfigurationError(
            f"Dataset has {dataset.masks.shape[1]} part masks, model has {num_parts} subspaces"
        )
    indices = draw_groups(len(dataset), groups, num_parts, seed)
    images = dataset.images_chw(indices.reshape(-1)).reshape(groups, num_parts, 3, dataset.height, dataset.width)
    own_masks = dataset.masks[indices, np.arange(num_parts)[None, :]]  # (G, C, H, W)

    mixes = group_mix_images(model, images)
    errors, valid = masked_errors(mixes, images, own_masks)

    skipped = np.argwhere(~valid)
    for g, j in skipped:
        logger.warning(
            "Skipping zero-area mask in mixing error",
            extra={"group": int(g), "subspace": layout.names[j], "sprite": int(indices[g, j])},
        )

    per_subspace: list[float | None] = []
    for j in range(num_parts):
        column = errors[valid[:, j], j]
        per_subspace.append(float(column.mean()) if column.size else None)

    return MixingErrorReport(
        per_subspace=per_subspace,
        groups=groups,
        evaluated=[int(v) for v in valid.sum(axis=0)],
        subspaces=list(layout.names),
    )
