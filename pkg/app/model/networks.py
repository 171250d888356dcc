"""
Residual convolutional autoencoder with a subspace-factored latent layer.

Encoder: three stride-2 convolutions (3->16->32->64), one residual block,
then a fully connected bottleneck to d latents. Decoder: the mirror image,
three nearest-neighbour upsampling stages (64, 32, 16 channels) and a
sigmoid output. Between them sits the mixing layer; the per-subspace heads
and the subspace classifier drive the entropy loss.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from app.core.errors import ConfigurationError, ShapeError
from app.core.logging import get_logger
from app.model.isa import MixingMatrix
from app.model.layout import SubspaceLayout
from app.tensor import ops
from app.tensor.tensor import Tensor, as_tensor

logger = get_logger(__name__)

IMAGE_SHAPE = (3, 32, 32)
BOTTLENECK_SHAPE = (64, 4, 4)
BOTTLENECK_SIZE = 64 * 4 * 4
ARCH_ISA = "resnet-ae/isa"
ARCH_NO_ISA = "resnet-ae/no-isa"

# (name, in_channels, out_channels) of the convolutions on each side
_ENCODER_CONVS = (("conv1", 3, 16), ("conv2", 16, 32), ("conv3", 32, 64))
_DECODER_STAGES = (("up1", 64, 64), ("up2", 64, 32), ("up3", 32, 16))


def _conv_param_shapes(prefix: str, c_in: int, c_out: int, k: int = 3) -> dict[str, tuple[int, ...]]:
    return {f"{prefix}.weight": (c_out, c_in, k, k), f"{prefix}.bias": (c_out,)}


def _linear_param_shapes(prefix: str, n_in: int, n_out: int) -> dict[str, tuple[int, ...]]:
    return {f"{prefix}.weight": (n_out, n_in), f"{prefix}.bias": (n_out,)}


def parameter_shapes(layout: SubspaceLayout, isa_enabled: bool = True) -> dict[str, tuple[int, ...]]:
    """Name -> shape of every learnable array, in creation order."""
    d = layout.total_dim
    shapes: dict[str, tuple[int, ...]] = {}
    for name, c_in, c_out in _ENCODER_CONVS:
        shapes.update(_conv_param_shapes(f"encoder.{name}", c_in, c_out))
    shapes.update(_conv_param_shapes("encoder.res.conv_a", 64, 64))
    shapes.update(_conv_param_shapes("encoder.res.conv_b", 64, 64))
    shapes.update(_linear_param_shapes("encoder.fc", BOTTLENECK_SIZE, d))

    shapes.update(_linear_param_shapes("decoder.fc", d, BOTTLENECK_SIZE))
    shapes.update(_conv_param_shapes("decoder.res.conv_a", 64, 64))
    shapes.update(_conv_param_shapes("decoder.res.conv_b", 64, 64))
    for name, c_in, c_out in _DECODER_STAGES:
        shapes.update(_conv_param_shapes(f"decoder.{name}", c_in, c_out))
    shapes.update(_conv_param_shapes("decoder.out", 16, 3))

    if isa_enabled:
        shapes["isa.A"] = (d, d)
    for i, d_i in enumerate(layout.dims):
        shapes.update(_linear_param_shapes(f"heads.{i}", d_i, layout.max_dim))
    shapes.update(_linear_param_shapes("classifier", layout.max_dim, layout.num_subspaces))
    return shapes


def _init_array(name: str, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    if name == "isa.A":
        return np.eye(shape[0]) + 0.01 * rng.standard_normal(shape)
    if name.endswith(".bias"):
        return np.zeros(shape)
    fan_in = int(np.prod(shape[1:]))
    # He init for ReLU layers, LeCun for the layers feeding sigmoid/softmax
    gain = 1.0 if name.startswith(("decoder.out", "classifier")) else 2.0
    return rng.standard_normal(shape) * np.sqrt(gain / fan_in)


class SubspaceAutoencoder:
    """
    Autoencoder whose latent vector is factored into part subspaces.

    Attributes:
        layout: Subspace layout of the latent/source vectors
        params: Every learnable tensor by dotted name
        mixing: Mixing layer, or None when the ISA layer is disabled
        isa_enabled: False replaces the mixing layer by the identity
    """

    def __init__(
        self,
        layout: SubspaceLayout,
        params: dict[str, Tensor],
        isa_enabled: bool = True,
    ) -> None:
        expected = parameter_shapes(layout, isa_enabled)
        missing = sorted(set(expected) - set(params))
        if missing:
            raise ConfigurationError(f"Missing model parameters: {', '.join(missing)}", missing=missing)
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ShapeError(
                    f"Parameter {name!r} has shape {params[name].shape}, layout requires {shape}",
                    parameter=name,
                )
        self.layout = layout
        self.isa_enabled = isa_enabled
        self.params = {name: params[name] for name in expected}
        self.mixing = MixingMatrix(self.params["isa.A"]) if isa_enabled else None

    @classmethod
    def initialize(
        cls,
        layout: SubspaceLayout,
        rng: np.random.Generator,
        isa_enabled: bool = True,
    ) -> SubspaceAutoencoder:
        """Random initialization; draws happen in a fixed parameter order."""
        params = {
            name: Tensor.parameter(_init_array(name, shape, rng), name=name)
            for name, shape in parameter_shapes(layout, isa_enabled).items()
        }
        return cls(layout, params, isa_enabled)

    @property
    def architecture(self) -> str:
        return ARCH_ISA if self.isa_enabled else ARCH_NO_ISA

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.params)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    # ------------------------------------------------------------------
    # Building blocks
    # ------------------------------------------------------------------

    def _conv(self, prefix: str, x: Tensor, stride: int = 1) -> Tensor:
        return ops.conv2d(
            x, self.params[f"{prefix}.weight"], self.params[f"{prefix}.bias"], stride=stride, padding=1
        )

    def _linear(self, prefix: str, x: Tensor) -> Tensor:
        return ops.add(
            ops.matmul(x, ops.transpose(self.params[f"{prefix}.weight"])), self.params[f"{prefix}.bias"]
        )

    def _residual(self, prefix: str, x: Tensor) -> Tensor:
        h = ops.relu(self._conv(f"{prefix}.conv_a", x))
        return ops.relu(ops.add(x, self._conv(f"{prefix}.conv_b", h)))

    # ------------------------------------------------------------------
    # Autoencoder
    # ------------------------------------------------------------------

    def encode(self, images: Any) -> Tensor:
        """
        Map images to latent vectors.

        Args:
            images: (3, 32, 32) or (N, 3, 32, 32) values in [0, 1]

        Returns:
            z of shape (d,) or (N, d)
        """
        x = as_tensor(images)
        single = x.ndim == 3
        if x.shape[-3:] != IMAGE_SHAPE or x.ndim not in (3, 4):
            raise ShapeError(f"encode: expected (N,) {IMAGE_SHAPE} images, got {x.shape}")
        if single:
            x = x.reshape(1, *IMAGE_SHAPE)
        h = x
        for name, _, _ in _ENCODER_CONVS:
            h = ops.relu(self._conv(f"encoder.{name}", h, stride=2))
        h = self._residual("encoder.res", h)
        z = self._linear("encoder.fc", h.reshape(h.shape[0], BOTTLENECK_SIZE))
        return z.reshape(self.layout.total_dim) if single else z

    def decode(self, z: Any) -> Tensor:
        """
        Map latent vectors to images in (0, 1).

        Args:
            z: (d,) or (N, d)

        Returns:
            Images of shape (3, 32, 32) or (N, 3, 32, 32)
        """
        z = as_tensor(z)
        d = self.layout.total_dim
        single = z.ndim == 1
        if z.shape[-1:] != (d,) or z.ndim not in (1, 2):
            raise ShapeError(f"decode: expected latent length {d}, got shape {z.shape}")
        if single:
            z = z.reshape(1, d)
        h = ops.relu(self._linear("decoder.fc", z))
        h = h.reshape(h.shape[0], *BOTTLENECK_SHAPE)
        h = self._residual("decoder.res", h)
        for name, _, _ in _DECODER_STAGES:
            h = ops.relu(self._conv(f"decoder.{name}", ops.upsample2x(h)))
        out = ops.sigmoid(self._conv("decoder.out", h))
        return out.reshape(*IMAGE_SHAPE) if single else out

    # ------------------------------------------------------------------
    # Mixing layer
    # ------------------------------------------------------------------

    def to_sources(self, z: Any) -> Tensor:
        if self.mixing is None:
            return as_tensor(z)
        return self.mixing.to_sources(z)

    def to_latent(self, s: Any) -> Tensor:
        if self.mixing is None:
            return as_tensor(s)
        return self.mixing.to_latent(s)

    def refresh_inverse(self) -> None:
        if self.mixing is not None:
            self.mixing.refresh_inverse()

    def reconstruct(self, images: Any, through_sources: bool = False) -> Tensor:
        """decode(encode(x)), optionally taking the round trip through source space."""
        z = self.encode(images)
        if through_sources:
            z = self.to_latent(self.to_sources(z))
        return self.decode(z)

    # ------------------------------------------------------------------
    # Entropy-loss heads
    # ------------------------------------------------------------------

    def head_forward(self, s: Any, i: int) -> Tensor:
        """Embed subspace ``i`` of ``s`` ((d,) or (B, d)) into d_max dimensions with ReLU."""
        s = as_tensor(s)
        self.layout.check_index(i)
        block = self.layout.block(i)
        part = s[..., block]
        single = part.ndim == 1
        if single:
            part = part.reshape(1, self.layout.dims[i])
        out = ops.relu(self._linear(f"heads.{i}", part))
        return out.reshape(self.layout.max_dim) if single else out

    def classifier_logits(self, embedded: Any) -> Tensor:
        embedded = as_tensor(embedded)
        if embedded.shape[-1:] != (self.layout.max_dim,):
            raise ShapeError(
                f"classifier: expected embedding length {self.layout.max_dim}, got {embedded.shape}"
            )
        single = embedded.ndim == 1
        if single:
            embedded = embedded.reshape(1, self.layout.max_dim)
        logits = self._linear("classifier", embedded)
        return logits.reshape(self.layout.num_subspaces) if single else logits

    def classify_subspace(self, embedded: Any) -> Tensor:
        """Softmax over subspaces for one embedding (d_max,) or a batch (B, d_max)."""
        return ops.softmax(self.classifier_logits(embedded))
