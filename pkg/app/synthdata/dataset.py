"""
In-memory sprite containers.

Images are stored H x W x 3 (the file layout); ``images_chw`` gives the
channel-first view the model consumes.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from app.core.errors import ConfigurationError, ShapeError
from app.tensor.tensor import get_default_dtype

PART_NAMES: tuple[str, ...] = ("bg_hair", "face", "eyebrows", "eyes", "mouth")
ATTRIBUTE_NAMES: tuple[str, ...] = (
    "mouth_open",
    "dark_hair",
    "pale_skin",
    "large_eyes",
    "thick_eyebrows",
    "round_face",
)
NUM_PARTS = len(PART_NAMES)


def attribute_bit(name: str) -> int:
    """Bit index of an attribute inside the packed label field."""
    try:
        return ATTRIBUTE_NAMES.index(name)
    except ValueError:
        raise ConfigurationError(
            f"Unknown attribute {name!r}; expected one of {', '.join(ATTRIBUTE_NAMES)}",
            attribute=name,
        ) from None


def pack_attributes(flags: dict[str, bool]) -> int:
    return sum(1 << attribute_bit(name) for name, value in flags.items() if value)


def unpack_attributes(bits: int) -> dict[str, bool]:
    return {name: bool((bits >> i) & 1) for i, name in enumerate(ATTRIBUTE_NAMES)}


@dataclass(frozen=True, eq=False)
class Sprite:
    """One generated face: image (H, W, 3), part masks (5, H, W), packed labels."""

    image: np.ndarray
    masks: np.ndarray
    attrs: int

    def has(self, attribute: str) -> bool:
        return bool((self.attrs >> attribute_bit(attribute)) & 1)


class SpriteDataset:
    """
    Column-oriented collection of sprites.

    Attributes:
        images: (N, H, W, 3) values in [0, 1]
        masks: (N, 5, H, W) soft part masks summing to 1 per pixel
        attrs: (N,) packed attribute bitfields
    """

    def __init__(self, images: np.ndarray, masks: np.ndarray, attrs: np.ndarray) -> None:
        images = np.asarray(images)
        masks = np.asarray(masks)
        attrs = np.asarray(attrs, dtype=np.uint32).reshape(-1)
        n = images.shape[0] if images.ndim == 4 else -1
        if images.ndim != 4 or images.shape[3] != 3:
            raise ShapeError(f"Images must be (N, H, W, 3), got {images.shape}")
        if masks.shape != (n, NUM_PARTS, images.shape[1], images.shape[2]):
            raise ShapeError(
                f"Masks {masks.shape} do not match images {images.shape} with {NUM_PARTS} parts"
            )
        if attrs.shape != (n,):
            raise ShapeError(f"Attribute vector {attrs.shape} does not match {n} images")
        self.images = images
        self.masks = masks
        self.attrs = attrs

    @classmethod
    def from_sprites(cls, sprites: Sequence[Sprite], height: int = 32, width: int = 32) -> SpriteDataset:
        if not sprites:
            return cls.empty(height, width)
        return cls(
            np.stack([s.image for s in sprites]),
            np.stack([s.masks for s in sprites]),
            np.array([s.attrs for s in sprites], dtype=np.uint32),
        )

    @classmethod
    def empty(cls, height: int = 32, width: int = 32) -> SpriteDataset:
        return cls(
            np.zeros((0, height, width, 3)),
            np.zeros((0, NUM_PARTS, height, width)),
            np.zeros(0, dtype=np.uint32),
        )

    def __len__(self) -> int:
        return int(self.images.shape[0])

    def __getitem__(self, index: int) -> Sprite:
        return Sprite(self.images[index], self.masks[index], int(self.attrs[index]))

    @property
    def height(self) -> int:
        return int(self.images.shape[1])

    @property
    def width(self) -> int:
        return int(self.images.shape[2])

    def sprites(self) -> list[Sprite]:
        return [self[i] for i in range(len(self))]

    def subset(self, indices: Sequence[int] | np.ndarray) -> SpriteDataset:
        idx = np.asarray(indices, dtype=np.int64)
        return SpriteDataset(self.images[idx], self.masks[idx], self.attrs[idx])

    def images_chw(self, indices: Sequence[int] | np.ndarray | None = None) -> np.ndarray:
        """Images as (N, 3, H, W) in the tensor core's default dtype."""
        images = self.images if indices is None else self.images[np.asarray(indices)]
        return np.ascontiguousarray(images.transpose(0, 3, 1, 2), dtype=get_default_dtype())

    def attribute(self, name: str) -> np.ndarray:
        """Boolean label column for one attribute."""
        return ((self.attrs >> np.uint32(attribute_bit(name))) & 1).astype(bool)
