"""Autoencoder, mixing layer, entropy-loss heads and the checkpoint codec."""

from app.model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from app.model.isa import MixingMatrix, lu_inverse
from app.model.layout import DEFAULT_DIMS, SubspaceLayout
from app.model.networks import ARCH_ISA, ARCH_NO_ISA, SubspaceAutoencoder, parameter_shapes

__all__ = [
    "ARCH_ISA",
    "ARCH_NO_ISA",
    "DEFAULT_DIMS",
    "Checkpoint",
    "MixingMatrix",
    "SubspaceAutoencoder",
    "SubspaceLayout",
    "load_checkpoint",
    "lu_inverse",
    "parameter_shapes",
    "save_checkpoint",
]
