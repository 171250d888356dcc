"""
Procedural face sprites with exact part masks.

A sprite is painted back to front: background with a hair cap, the face
ellipse, two eyebrow bars, two eye disks and the mouth ellipse. Each layer's
coverage is a one-pixel antialiased signed-distance ramp; painting a layer
with coverage ``c`` scales every earlier mask by ``1 - c`` and adds ``c`` to
its own, so the masks remain an exact partition of every pixel. Detail
layers are additionally clipped by the face coverage.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tenacity import RetryError, Retrying, retry_if_exception_type, stop_after_attempt

from app.core.errors import GenerationError
from app.core.logging import get_logger
from app.synthdata.dataset import NUM_PARTS, Sprite, SpriteDataset, pack_attributes
from app.synthdata.rng import XorShift64Star

logger = get_logger(__name__)

IMAGE_SIZE = 32
MIN_PART_AREA = 0.5
ANTIALIAS_WIDTH = 1.0  # pixels

Range = tuple[float, float]

# Palettes: (low end, high end) of each jittered tone
SKIN_PALETTE = ((0.45, 0.30, 0.20), (0.98, 0.88, 0.80))
HAIR_PALETTE = ((0.10, 0.07, 0.05), (0.90, 0.75, 0.40))
EYE_PALETTE = ((0.20, 0.12, 0.05), (0.25, 0.45, 0.70))
MOUTH_PALETTE = ((0.55, 0.10, 0.15), (0.85, 0.35, 0.40))
BACKGROUND_PALETTE = ((0.15, 0.35, 0.45), (0.80, 0.85, 0.70))

# Attribute thresholds on the sampled parameters
MOUTH_OPEN_ABOVE = 0.5
DARK_HAIR_BELOW = 0.5
PALE_SKIN_ABOVE = 0.5
LARGE_EYES_ABOVE = 1.8
THICK_BROWS_ABOVE = 0.85
ROUND_FACE_ABOVE = 0.89


class GenParams(BaseModel):
    """
    Dataset generation parameters.

    Identical parameters always produce a byte-identical dataset.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = Field(default=0, ge=0, lt=2**64, description="64-bit dataset seed")
    count: int = Field(default=4096, ge=1, description="Number of sprites")
    max_retries: int = Field(default=8, ge=1, description="Resampling budget per sprite")

    center_x: Range = (15.0, 17.0)
    center_y: Range = (16.0, 17.5)
    face_half_height: Range = (11.0, 13.0)
    face_aspect: Range = (0.78, 1.0)
    skin_tone: Range = (0.0, 1.0)
    hair_tone: Range = (0.0, 1.0)
    eye_tone: Range = (0.0, 1.0)
    mouth_tone: Range = (0.0, 1.0)
    background_tone: Range = (0.0, 1.0)
    eye_radius: Range = (1.2, 2.4)
    thin_brow: Range = (0.4, 0.8)
    thick_brow: Range = (0.9, 1.3)
    mouth_openness: Range = (0.0, 1.0)
    mouth_half_width: Range = (2.5, 3.8)
    thick_brow_given_dark_hair: float = Field(default=0.75, ge=0.0, le=1.0)
    thick_brow_given_light_hair: float = Field(default=0.25, ge=0.0, le=1.0)

    @field_validator(
        "center_x",
        "center_y",
        "face_half_height",
        "face_aspect",
        "skin_tone",
        "hair_tone",
        "eye_tone",
        "mouth_tone",
        "background_tone",
        "eye_radius",
        "thin_brow",
        "thick_brow",
        "mouth_openness",
        "mouth_half_width",
    )
    @classmethod
    def validate_range(cls, v: Range) -> Range:
        """Jitter ranges must be non-degenerate."""
        low, high = v
        if not low < high:
            raise ValueError(f"range must satisfy low < high, got ({low}, {high})")
        return v


@dataclass(frozen=True)
class SpriteRecipe:
    """Every sampled parameter of one sprite; rendering is a pure function of it."""

    center_x: float
    center_y: float
    half_height: float
    aspect: float
    skin_tone: float
    hair_tone: float
    eye_tone: float
    mouth_tone: float
    background_tone: float
    eye_radius: float
    brow_thickness: float
    mouth_openness: float
    mouth_half_width: float

    @property
    def half_width(self) -> float:
        return self.aspect * self.half_height

    def attributes(self) -> dict[str, bool]:
        """Labels derived from the parameters by fixed thresholds."""
        return {
            "mouth_open": self.mouth_openness > MOUTH_OPEN_ABOVE,
            "dark_hair": self.hair_tone < DARK_HAIR_BELOW,
            "pale_skin": self.skin_tone > PALE_SKIN_ABOVE,
            "large_eyes": self.eye_radius > LARGE_EYES_ABOVE,
            "thick_eyebrows": self.brow_thickness > THICK_BROWS_ABOVE,
            "round_face": self.aspect > ROUND_FACE_ABOVE,
        }

    def with_updates(self, **changes: float) -> SpriteRecipe:
        return replace(self, **changes)


class GeometryRejected(Exception):
    """A sampled recipe puts some part (almost) entirely off the canvas."""


def sample_recipe(params: GenParams, rng: XorShift64Star) -> SpriteRecipe:
    """Draw one recipe; the draw order is part of the dataset format."""
    u = rng.uniform
    center_x = u(*params.center_x)
    center_y = u(*params.center_y)
    half_height = u(*params.face_half_height)
    aspect = u(*params.face_aspect)
    skin_tone = u(*params.skin_tone)
    hair_tone = u(*params.hair_tone)
    eye_tone = u(*params.eye_tone)
    mouth_tone = u(*params.mouth_tone)
    background_tone = u(*params.background_tone)
    eye_radius = u(*params.eye_radius)
    p_thick = (
        params.thick_brow_given_dark_hair
        if hair_tone < DARK_HAIR_BELOW
        else params.thick_brow_given_light_hair
    )
    brow_range = params.thick_brow if rng.bernoulli(p_thick) else params.thin_brow
    brow_thickness = u(*brow_range)
    mouth_openness = u(*params.mouth_openness)
    mouth_half_width = u(*params.mouth_half_width)
    return SpriteRecipe(
        center_x=center_x,
        center_y=center_y,
        half_height=half_height,
        aspect=aspect,
        skin_tone=skin_tone,
        hair_tone=hair_tone,
        eye_tone=eye_tone,
        mouth_tone=mouth_tone,
        background_tone=background_tone,
        eye_radius=eye_radius,
        brow_thickness=brow_thickness,
        mouth_openness=mouth_openness,
        mouth_half_width=mouth_half_width,
    )


# ----------------------------------------------------------------------------
# Signed distance helpers (negative inside), evaluated at pixel centers
# ----------------------------------------------------------------------------


def _pixel_grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    coords = np.arange(size, dtype=np.float64) + 0.5
    return np.meshgrid(coords, coords, indexing="xy")


def _ellipse_sdf(x: np.ndarray, y: np.ndarray, cx: float, cy: float, ax: float, ay: float) -> np.ndarray:
    # First-order distance estimate f / |grad f| for f = (dx/ax)^2 + (dy/ay)^2 - 1
    dx, dy = x - cx, y - cy
    f = (dx / ax) ** 2 + (dy / ay) ** 2 - 1.0
    grad = np.hypot(2.0 * dx / ax**2, 2.0 * dy / ay**2)
    return f / np.maximum(grad, 1e-9)


def _disk_sdf(x: np.ndarray, y: np.ndarray, cx: float, cy: float, r: float) -> np.ndarray:
    return np.hypot(x - cx, y - cy) - r


def _box_sdf(x: np.ndarray, y: np.ndarray, cx: float, cy: float, hx: float, hy: float) -> np.ndarray:
    qx = np.abs(x - cx) - hx
    qy = np.abs(y - cy) - hy
    outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
    inside = np.minimum(np.maximum(qx, qy), 0.0)
    return outside + inside


def _coverage(sdf: np.ndarray) -> np.ndarray:
    """Antialiased coverage in [0, 1], ramping over ANTIALIAS_WIDTH across the edge."""
    return np.clip(0.5 - sdf / ANTIALIAS_WIDTH, 0.0, 1.0)


def _mix(palette: tuple[tuple[float, ...], tuple[float, ...]], t: float) -> np.ndarray:
    low, high = np.asarray(palette[0]), np.asarray(palette[1])
    return low + (high - low) * t


def face_coverage(recipe: SpriteRecipe, size: int = IMAGE_SIZE) -> np.ndarray:
    """Coverage of the face ellipse before any detail is painted over it."""
    x, y = _pixel_grid(size)
    return _coverage(
        _ellipse_sdf(x, y, recipe.center_x, recipe.center_y, recipe.half_width, recipe.half_height)
    )


def render(recipe: SpriteRecipe, size: int = IMAGE_SIZE) -> Sprite:
    """
    Paint a recipe into an image and its five part masks.

    Returns:
        Sprite with image (size, size, 3), masks (5, size, size) and packed labels
    """
    x, y = _pixel_grid(size)
    cx, cy = recipe.center_x, recipe.center_y
    ax, ay = recipe.half_width, recipe.half_height

    # Layer 0: background with a hair cap behind the upper head
    hair_sdf = np.maximum(_ellipse_sdf(x, y, cx, cy - 0.25 * ay, ax + 3.0, ay + 2.0), y - cy)
    hair = _coverage(hair_sdf)[..., None]
    hair_color = _mix(HAIR_PALETTE, recipe.hair_tone)
    layer0_color = (1.0 - hair) * _mix(BACKGROUND_PALETTE, recipe.background_tone) + hair * hair_color

    face = face_coverage(recipe, size)

    eye_y = cy - 0.15 * ay
    eye_dx = 0.42 * ax
    r = recipe.eye_radius
    brow_y = eye_y - r - 1.0 - recipe.brow_thickness
    brow_half_width = r + 1.0
    brows = np.maximum(
        _coverage(_box_sdf(x, y, cx - eye_dx, brow_y, brow_half_width, recipe.brow_thickness)),
        _coverage(_box_sdf(x, y, cx + eye_dx, brow_y, brow_half_width, recipe.brow_thickness)),
    )
    eyes = np.maximum(
        _coverage(_disk_sdf(x, y, cx - eye_dx, eye_y, r)),
        _coverage(_disk_sdf(x, y, cx + eye_dx, eye_y, r)),
    )
    mouth_half_height = 0.6 + 2.4 * recipe.mouth_openness
    mouth = _coverage(
        _ellipse_sdf(x, y, cx, cy + 0.5 * ay, recipe.mouth_half_width, mouth_half_height)
    )

    coverages = [face, brows * face, eyes * face, mouth * face]
    masks = np.zeros((NUM_PARTS, size, size), dtype=np.float64)
    masks[0] = 1.0
    for part, c in enumerate(coverages, start=1):
        masks[:part] *= 1.0 - c
        masks[part] = c

    # An open mouth shows a darker interior
    mouth_color = _mix(MOUTH_PALETTE, recipe.mouth_tone) * (1.0 - 0.5 * recipe.mouth_openness)
    colors = [
        _mix(SKIN_PALETTE, recipe.skin_tone),
        hair_color * 0.8,
        _mix(EYE_PALETTE, recipe.eye_tone),
        mouth_color,
    ]
    image = masks[0][..., None] * layer0_color
    for part, color in enumerate(colors, start=1):
        image = image + masks[part][..., None] * color
    image = np.clip(image, 0.0, 1.0)

    return Sprite(image=image, masks=masks, attrs=pack_attributes(recipe.attributes()))


def _check_geometry(sprite: Sprite) -> None:
    areas = sprite.masks.sum(axis=(1, 2))
    if np.any(areas < MIN_PART_AREA):
        raise GeometryRejected(f"part areas {np.round(areas, 2).tolist()} below {MIN_PART_AREA}")


def generate_recipe(params: GenParams, index: int) -> SpriteRecipe:
    """
    Sample the accepted recipe of sprite ``index``.

    Rejected geometry is resampled from the same substream, up to
    ``params.max_retries`` attempts.

    Raises:
        GenerationError: If every attempt is rejected
    """
    rng = XorShift64Star.for_sprite(params.seed, index)

    def attempt() -> SpriteRecipe:
        recipe = sample_recipe(params, rng)
        _check_geometry(render(recipe))
        return recipe

    retrying = Retrying(
        stop=stop_after_attempt(params.max_retries),
        retry=retry_if_exception_type(GeometryRejected),
    )
    try:
        return retrying(attempt)
    except RetryError as e:
        last = e.last_attempt.exception()
        raise GenerationError(
            f"Sprite {index}: no valid geometry after {params.max_retries} attempts ({last})",
            index=index,
            seed=params.seed,
        ) from last


def generate_one(params: GenParams, index: int) -> Sprite:
    """Sprite ``index`` of the dataset described by ``params``; independent of other indices."""
    return render(generate_recipe(params, index))


def generate(params: GenParams) -> SpriteDataset:
    """
    Generate the full ordered dataset.

    Every sprite draws from its own (seed, index) substream, so any subset
    can be regenerated independently with ``generate_one``.
    """
    sprites = [generate_one(params, i) for i in range(params.count)]
    logger.debug("Sprites generated", extra={"count": params.count, "seed": params.seed})
    return SpriteDataset.from_sprites(sprites, IMAGE_SIZE, IMAGE_SIZE)
