"""
Attribute analysis in source space: per-subspace PCA separation of labeled
classes, class-mean editing directions and subspace-classifier accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.core.errors import ConfigurationError, ShapeError
from app.core.logging import get_logger
from app.eval.inference import map_chunks, sources_all
from app.eval.pca import pca3
from app.model.networks import IMAGE_SHAPE, SubspaceAutoencoder
from app.synthdata.dataset import ATTRIBUTE_NAMES, SpriteDataset, attribute_bit
from app.tensor.tensor import as_tensor

logger = get_logger(__name__)

MIN_CLASS_SIZE = 10


@dataclass
class SubspaceStats:
    axes: np.ndarray
    eigenvalues: np.ndarray
    distances: dict[str, float]
    rank_deficient: bool


@dataclass
class SubspaceAnalysis:
    """
    Attributes:
        subspaces: Per subspace name: PCA axes and class-mean distances
        excluded: Attributes skipped for having fewer than 10 samples on a side
    """

    subspaces: dict[str, SubspaceStats]
    excluded: list[str] = field(default_factory=list)

    def distances(self) -> dict[str, dict[str, float]]:
        """subspace -> attribute -> class-mean distance."""
        return {name: dict(stats.distances) for name, stats in self.subspaces.items()}

    def argmax_subspace(self, attribute: str) -> str:
        """Subspace in which ``attribute`` separates best."""
        if attribute in self.excluded:
            raise ConfigurationError(f"Attribute {attribute!r} was excluded from the analysis")
        return max(self.subspaces, key=lambda name: self.subspaces[name].distances[attribute])

    def to_dict(self) -> dict:
        analysed = [a for a in ATTRIBUTE_NAMES if a not in self.excluded]
        return {
            "distances": self.distances(),
            "argmax_subspace": {a: self.argmax_subspace(a) for a in analysed},
            "excluded_attributes": list(self.excluded),
            "principal_axes": {n: s.axes.tolist() for n, s in self.subspaces.items()},
            "explained_variance": {n: s.eigenvalues.tolist() for n, s in self.subspaces.items()},
            "rank_deficient": {n: s.rank_deficient for n, s in self.subspaces.items()},
        }


def separation_from_sources(
    sources: np.ndarray,
    labels: dict[str, np.ndarray],
    model: SubspaceAutoencoder,
) -> SubspaceAnalysis:
    """Separation statistics for precomputed source vectors (N, d)."""
    layout = model.layout
    usable: dict[str, np.ndarray] = {}
    excluded: list[str] = []
    for name, flags in labels.items():
        positives = int(flags.sum())
        negatives = int(flags.size - positives)
        if positives < MIN_CLASS_SIZE or negatives < MIN_CLASS_SIZE:
            logger.warning(
                "Excluding attribute with too few samples on one side",
                extra={"attribute": name, "positives": positives, "negatives": negatives},
            )
            excluded.append(name)
            continue
        usable[name] = flags

    subspaces: dict[str, SubspaceStats] = {}
    for i, name in enumerate(layout.names):
        result = pca3(sources[:, layout.block(i)])
        distances = {
            attr: float(
                np.linalg.norm(
                    result.projected[flags].mean(axis=0) - result.projected[~flags].mean(axis=0)
                )
            )
            for attr, flags in usable.items()
        }
        subspaces[name] = SubspaceStats(
            axes=result.axes,
            eigenvalues=result.eigenvalues,
            distances=distances,
            rank_deficient=result.rank_deficient,
        )
    return SubspaceAnalysis(subspaces=subspaces, excluded=excluded)


def attribute_separation(model: SubspaceAutoencoder, dataset: SpriteDataset) -> SubspaceAnalysis:
    """
    Encode every sprite, run a 3-component PCA per subspace and measure the
    L2 distance between the projected class means of each attribute.
    """
    if len(dataset) == 0:
        raise ConfigurationError("attribute_separation needs a non-empty dataset")
    sources = sources_all(model, dataset)
    labels = {name: dataset.attribute(name) for name in ATTRIBUTE_NAMES}
    return separation_from_sources(sources, labels, model)


def attribute_direction(
    model: SubspaceAutoencoder,
    dataset: SpriteDataset,
    attribute: str,
    sources: np.ndarray | None = None,
) -> np.ndarray:
    """
    Editing direction v = mean(s | attribute) - mean(s) in source space.

    Raises:
        ConfigurationError: For an unknown attribute or one no sprite carries
    """
    attribute_bit(attribute)
    flags = dataset.attribute(attribute)
    if not flags.any():
        raise ConfigurationError(f"No sprite in the dataset has attribute {attribute!r}")
    s = sources if sources is not None else sources_all(model, dataset)
    return s[flags].mean(axis=0) - s.mean(axis=0)


def shift_sources(sources: np.ndarray, direction: np.ndarray, strength: float) -> np.ndarray:
    return sources + strength * direction


def attribute_edit(
    model: SubspaceAutoencoder,
    dataset: SpriteDataset,
    attribute: str,
    image: np.ndarray,
    strength: float,
    direction: np.ndarray | None = None,
) -> np.ndarray:
    """
    Strengthen (or weaken, for negative strength) an attribute in one image.

    Args:
        image: (3, 32, 32) channel-first image
        direction: Precomputed ``attribute_direction``; computed when omitted

    Returns:
        Edited (3, 32, 32) image. Strength 0 gives the round trip through
        source space, i.e. ``model.reconstruct(image, through_sources=True)``.
    """
    x = np.asarray(image)
    if x.shape != IMAGE_SHAPE:
        raise ShapeError(f"attribute_edit expects a {IMAGE_SHAPE} image, got {x.shape}")
    v = direction if direction is not None else attribute_direction(model, dataset, attribute)
    s = model.to_sources(model.encode(x)).data
    edited = shift_sources(s, v.astype(s.dtype), strength)
    return model.decode(model.to_latent(as_tensor(edited))).data


def classifier_accuracy(model: SubspaceAutoencoder, dataset: SpriteDataset) -> float:
    """Fraction of (sprite, subspace) instances the classifier assigns to the right subspace."""
    if len(dataset) == 0:
        raise ConfigurationError("classifier_accuracy needs a non-empty dataset")
    sources = sources_all(model, dataset)
    num_classes = model.layout.num_subspaces

    correct = 0
    for i in range(num_classes):
        logits = map_chunks(lambda s, i=i: model.classifier_logits(model.head_forward(s, i)), sources)
        correct += int(np.sum(np.argmax(logits, axis=1) == i))
    return correct / (len(sources) * num_classes)
