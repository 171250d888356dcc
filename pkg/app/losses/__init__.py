"""Reconstruction, gradient, mask and entropy losses plus latent mixing."""

from app.losses.mixing import MixSpec, mix_sources
from app.losses.terms import (
    TERM_NAMES,
    EntropyResult,
    LossTerms,
    LossWeights,
    entropy_loss,
    gradient_loss,
    mask_loss,
    recon_loss,
    total_loss,
)

__all__ = [
    "TERM_NAMES",
    "EntropyResult",
    "LossTerms",
    "LossWeights",
    "MixSpec",
    "entropy_loss",
    "gradient_loss",
    "mask_loss",
    "mix_sources",
    "recon_loss",
    "total_loss",
]
