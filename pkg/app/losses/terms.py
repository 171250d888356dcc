"""
Loss terms and their weighted combination.

- recon_loss (L_a): pixel MSE
- gradient_loss (L_g): squared difference of forward-difference image gradients
- mask_loss (L_m): a subspace swap may only change its own masked region
- entropy_loss (L_e): subspace embeddings must be classifiable by subspace
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.errors import DivergedTrainingError, ShapeError
from app.model.networks import SubspaceAutoencoder
from app.tensor import ops
from app.tensor.tensor import Tensor, as_tensor

TERM_NAMES = ("L_a", "L_g", "L_m", "L_e")


class LossWeights(BaseModel):
    """Weights of L_a, L_g, L_m and L_e in the total loss."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lambda1: float = Field(default=2.0, ge=0.0, description="Reconstruction (L_a)")
    lambda2: float = Field(default=1.0, ge=0.0, description="Image gradient (L_g)")
    lambda3: float = Field(default=1.0, ge=0.0, description="Mask (L_m)")
    lambda4: float = Field(default=1.0, ge=0.0, description="Entropy (L_e)")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3, self.lambda4)


def _check_same_shape(op: str, *tensors: Tensor) -> None:
    shapes = [t.shape for t in tensors]
    if any(s != shapes[0] for s in shapes):
        raise ShapeError(f"{op}: image shapes differ: {shapes}", shapes=shapes)


def recon_loss(image_in: Tensor | np.ndarray, image_out: Tensor | np.ndarray) -> Tensor:
    """Mean squared error over every pixel and channel."""
    a, b = as_tensor(image_in), as_tensor(image_out)
    _check_same_shape("recon_loss", a, b)
    return ops.mean(ops.square(ops.sub(a, b)))


def gradient_loss(image_in: Tensor | np.ndarray, image_out: Tensor | np.ndarray) -> Tensor:
    """
    (1/p) * ||grad I_in - grad I_out||^2 with p = H * W pixels.

    Gradients are forward differences along x and y (the last column/row
    difference is 0); squares are summed over both directions and all
    channels, then averaged over the images of a batch.
    """
    a, b = as_tensor(image_in), as_tensor(image_out)
    _check_same_shape("gradient_loss", a, b)
    if a.ndim < 3:
        raise ShapeError(f"gradient_loss: expected (..., C, H, W) images, got {a.shape}")
    height, width = a.shape[-2:]
    num_images = int(np.prod(a.shape[:-3], dtype=np.int64))

    # Differencing is linear, so the gradient of the difference is used
    err = ops.sub(a, b)
    dx = ops.sub(err[..., :, 1:], err[..., :, :-1])
    dy = ops.sub(err[..., 1:, :], err[..., :-1, :])
    total = ops.add(ops.sum(ops.square(dx)), ops.sum(ops.square(dy)))
    return ops.scale(total, 1.0 / (height * width * num_images))


def mask_loss(
    image_mix: Tensor | np.ndarray,
    image_in: Tensor | np.ndarray,
    image_t: Tensor | np.ndarray,
    mask_in: Tensor | np.ndarray,
    mask_t: Tensor | np.ndarray,
) -> Tensor:
    """
    Penalize changes outside the swapped region and mismatch inside it.

    mean[(I_mix - I_in)^2 (1 - max(M_in, M_t)) + (I_mix - I_t)^2 min(M_in, M_t)]

    Masks have the image shape without the channel axis and broadcast over
    channels.
    """
    mix, src, tgt = as_tensor(image_mix), as_tensor(image_in), as_tensor(image_t)
    _check_same_shape("mask_loss", mix, src, tgt)
    m_in, m_t = as_tensor(mask_in), as_tensor(mask_t)
    expected = mix.shape[:-3] + mix.shape[-2:]
    if m_in.shape != expected or m_t.shape != expected:
        raise ShapeError(
            f"mask_loss: masks {m_in.shape}/{m_t.shape} do not match images {mix.shape}",
            shapes=[m_in.shape, m_t.shape, mix.shape],
        )
    channel_shape = mix.shape[:-3] + (1,) + mix.shape[-2:]
    outside = ops.sub(1.0, ops.maximum(m_in, m_t)).reshape(channel_shape)
    inside = ops.minimum(m_in, m_t).reshape(channel_shape)

    keep = ops.mul(ops.square(ops.sub(mix, src)), outside)
    take = ops.mul(ops.square(ops.sub(mix, tgt)), inside)
    return ops.mean(ops.add(keep, take))


@dataclass
class EntropyResult:
    loss: Tensor
    accuracy: float


def entropy_loss(
    sources: Tensor | np.ndarray,
    model: SubspaceAutoencoder,
    return_accuracy: bool = False,
) -> Tensor | EntropyResult:
    """
    Cross-entropy of classifying every subspace embedding by its subspace.

    Each of the B source vectors yields C instances (one per subspace,
    embedded by its head to d_max); the classifier must recover the
    subspace index. The loss is the mean of -log p[true subspace] over all
    B * C instances.

    Args:
        sources: (B, d) source vectors
        model: Provides the heads and the classifier
        return_accuracy: Also report the argmax accuracy of the batch

    Returns:
        The loss tensor, or an ``EntropyResult`` with the accuracy
    """
    s = as_tensor(sources)
    layout = model.layout
    if s.ndim == 1:
        s = s.reshape(1, layout.total_dim)
    if s.ndim != 2 or s.shape[1] != layout.total_dim or s.shape[0] < 1:
        raise ShapeError(f"entropy_loss: expected (B, {layout.total_dim}) sources, got {s.shape}")
    batch = s.shape[0]
    num_classes = layout.num_subspaces

    embedded = ops.concat([model.head_forward(s, i) for i in range(num_classes)], axis=0)
    logits = model.classifier_logits(embedded)
    log_probs = ops.log_softmax(logits)
    targets = np.repeat(np.arange(num_classes), batch)
    picked = log_probs[np.arange(num_classes * batch), targets]
    loss = ops.scale(ops.mean(picked), -1.0)

    if not return_accuracy:
        return loss
    accuracy = float(np.mean(np.argmax(logits.data, axis=1) == targets))
    return EntropyResult(loss=loss, accuracy=accuracy)


@dataclass
class LossTerms:
    """The four loss terms of one step; an absent term counts as 0."""

    L_a: Tensor
    L_g: Tensor
    L_m: Tensor
    L_e: Tensor

    def items(self) -> list[tuple[str, Tensor]]:
        return [(name, getattr(self, name)) for name in TERM_NAMES]

    def as_floats(self) -> dict[str, float]:
        return {name: term.item() for name, term in self.items()}


def total_loss(terms: LossTerms, weights: LossWeights) -> Tensor:
    """
    lambda1 L_a + lambda2 L_g + lambda3 L_m + lambda4 L_e.

    Terms with weight 0 are left out of the sum, so they send no gradient.

    Raises:
        DivergedTrainingError: If any term is NaN or infinite, naming the first one
    """
    for name, term in terms.items():
        value = term.item()
        if not np.isfinite(value):
            raise DivergedTrainingError(f"Loss term {name} is not finite ({value})", term=name)

    total: Tensor | None = None
    for (_, term), weight in zip(terms.items(), weights.as_tuple()):
        if weight == 0.0:
            continue
        weighted = ops.scale(term, weight)
        total = weighted if total is None else ops.add(total, weighted)
    return total if total is not None else as_tensor(0.0)
