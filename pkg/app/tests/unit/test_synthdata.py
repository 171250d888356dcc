"""
Unit tests for the sprite generator, its random streams and the dataset container.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import ConfigurationError, GenerationError, ShapeError
from app.synthdata.dataset import (
    ATTRIBUTE_NAMES,
    NUM_PARTS,
    SpriteDataset,
    attribute_bit,
    pack_attributes,
    unpack_attributes,
)
from app.synthdata.dataset_io import encode_dataset
from app.synthdata.generator import (
    ANTIALIAS_WIDTH,
    IMAGE_SIZE,
    MIN_PART_AREA,
    GenParams,
    face_coverage,
    generate,
    generate_one,
    generate_recipe,
    render,
)
from app.synthdata.rng import XorShift64Star, splitmix64


def _dilate(support: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation with a square window of half-width ``radius``."""
    padded = np.pad(support, radius)
    out = np.zeros_like(support)
    height, width = support.shape
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            out |= padded[dy : dy + height, dx : dx + width]
    return out


@pytest.mark.unit
class TestRandomStreams:
    """Test the portable generators."""

    def test_splitmix_is_deterministic_and_mixing(self) -> None:
        """Test equal inputs agree and neighbours differ."""
        assert splitmix64(42) == splitmix64(42)
        assert splitmix64(42) != splitmix64(43)
        assert 0 <= splitmix64(2**64 - 1) < 2**64

    def test_uniform_range(self) -> None:
        """Test doubles fall in [0, 1)."""
        rng = XorShift64Star.for_sprite(7, 0)
        draws = [rng.random() for _ in range(2000)]
        assert min(draws) >= 0.0
        assert max(draws) < 1.0
        assert 0.45 < float(np.mean(draws)) < 0.55

    def test_substreams_are_independent(self) -> None:
        """Test different indices and seeds give different streams."""
        a = XorShift64Star.for_sprite(7, 0).next_u64()
        b = XorShift64Star.for_sprite(7, 1).next_u64()
        c = XorShift64Star.for_sprite(8, 0).next_u64()
        assert len({a, b, c}) == 3

    def test_zero_state_replaced(self) -> None:
        """Test the xorshift fixed point is avoided."""
        assert XorShift64Star(0).state != 0


@pytest.mark.unit
class TestAttributes:
    """Test label packing."""

    def test_bit_order(self) -> None:
        """Test mouth_open is bit 0."""
        assert attribute_bit("mouth_open") == 0
        assert attribute_bit("round_face") == len(ATTRIBUTE_NAMES) - 1

    def test_unknown_attribute(self) -> None:
        """Test unknown names are a configuration error."""
        with pytest.raises(ConfigurationError):
            attribute_bit("smiling")

    def test_pack_unpack(self) -> None:
        """Test packing inverts unpacking."""
        flags = {name: i % 2 == 0 for i, name in enumerate(ATTRIBUTE_NAMES)}
        assert unpack_attributes(pack_attributes(flags)) == flags


@pytest.mark.unit
class TestGenParams:
    """Test generator parameter validation."""

    def test_degenerate_range_rejected(self) -> None:
        """Test lo >= hi is invalid."""
        with pytest.raises(ValidationError):
            GenParams(eye_radius=(2.0, 2.0))

    def test_unknown_key_rejected(self) -> None:
        """Test extra keys are forbidden."""
        with pytest.raises(ValidationError):
            GenParams.model_validate({"seed": 1, "colour": 3})

    def test_seed_is_64_bit(self) -> None:
        """Test seeds beyond 64 bits are rejected."""
        with pytest.raises(ValidationError):
            GenParams(seed=2**64)


@pytest.mark.unit
class TestRender:
    """Test sprite rendering."""

    def test_shapes(self, tiny_dataset: SpriteDataset) -> None:
        """Test image and mask layout."""
        sprite = tiny_dataset[0]
        assert sprite.image.shape == (IMAGE_SIZE, IMAGE_SIZE, 3)
        assert sprite.masks.shape == (NUM_PARTS, IMAGE_SIZE, IMAGE_SIZE)

    def test_masks_partition_every_pixel(self, tiny_dataset: SpriteDataset) -> None:
        """Test the five masks sum to one per pixel and stay in [0, 1]."""
        np.testing.assert_allclose(tiny_dataset.masks.sum(axis=1), 1.0, atol=1e-12)
        assert tiny_dataset.masks.min() >= 0.0
        assert tiny_dataset.masks.max() <= 1.0

    def test_every_part_visible(self, tiny_dataset: SpriteDataset) -> None:
        """Test accepted sprites have every part above the minimum area."""
        assert np.all(tiny_dataset.masks.sum(axis=(2, 3)) >= MIN_PART_AREA)

    def test_images_in_unit_range(self, tiny_dataset: SpriteDataset) -> None:
        """Test pixel values are in [0, 1]."""
        assert tiny_dataset.images.min() >= 0.0
        assert tiny_dataset.images.max() <= 1.0

    def test_labels_follow_recipe(self, gen_params: GenParams) -> None:
        """Test labels are derived from the sampled parameters."""
        recipe = generate_recipe(gen_params, 3)
        sprite = render(recipe)
        for name, value in recipe.attributes().items():
            assert sprite.has(name) == value

    def test_mouth_opening_only_changes_mouth_region(self, gen_params: GenParams) -> None:
        """Test opening the mouth grows the mouth mask and nothing outside the face."""
        recipe = generate_recipe(gen_params, 0)
        closed = render(recipe.with_updates(mouth_openness=0.0))
        opened = render(recipe.with_updates(mouth_openness=1.0))
        assert opened.masks[4].sum() > closed.masks[4].sum()
        np.testing.assert_array_equal(opened.masks[0], closed.masks[0])
        assert opened.has("mouth_open") and not closed.has("mouth_open")

    def test_details_stay_inside_the_face(self, gen_params: GenParams) -> None:
        """Test eyebrow, eye and mouth masks vanish outside the dilated face ellipse."""
        radius = int(np.ceil(ANTIALIAS_WIDTH))
        for index in range(50):
            recipe = generate_recipe(gen_params, index)
            outside = ~_dilate(face_coverage(recipe) > 0.0, radius)
            details = render(recipe).masks[2:]
            assert outside.any()
            assert np.all(details[:, outside] == 0.0), index


@pytest.mark.unit
class TestGenerate:
    """Test dataset generation."""

    def test_same_seed_identical_bytes(self, gen_params: GenParams) -> None:
        """Test fixed-seed generation is byte-identical."""
        small = gen_params.model_copy(update={"count": 6})
        assert encode_dataset(generate(small)) == encode_dataset(generate(small))

    def test_different_seed_differs(self, gen_params: GenParams) -> None:
        """Test seeds change the data."""
        a = generate(gen_params.model_copy(update={"count": 3}))
        b = generate(gen_params.model_copy(update={"count": 3, "seed": 8}))
        assert not np.array_equal(a.images, b.images)

    def test_generate_one_matches_dataset(
        self, gen_params: GenParams, tiny_dataset: SpriteDataset
    ) -> None:
        """Test any sprite can be regenerated independently of the others."""
        sprite = generate_one(gen_params, 17)
        np.testing.assert_array_equal(sprite.image, tiny_dataset.images[17])
        assert sprite.attrs == int(tiny_dataset.attrs[17])

    def test_impossible_geometry_exhausts_retries(self) -> None:
        """Test a face placed off-canvas fails after the retry budget."""
        params = GenParams(seed=1, count=1, max_retries=3, center_x=(200.0, 201.0))
        with pytest.raises(GenerationError, match="3 attempts"):
            generate(params)

    def test_dark_hair_correlates_with_thick_eyebrows(self) -> None:
        """Test the generator couples dark hair with thick eyebrows."""
        dataset = generate(GenParams(seed=11, count=300))
        dark = dataset.attribute("dark_hair")
        thick = dataset.attribute("thick_eyebrows")
        assert thick[dark].mean() > thick[~dark].mean() + 0.25

    def test_labels_are_balanced(self) -> None:
        """Test every attribute holds for 30-70% of 1000 default sprites."""
        dataset = generate(GenParams(seed=7, count=1000))
        for name in ATTRIBUTE_NAMES:
            share = float(dataset.attribute(name).mean())
            assert 0.3 <= share <= 0.7, f"{name}: {share:.3f}"


@pytest.mark.unit
class TestSpriteDataset:
    """Test the column container."""

    def test_images_chw(self, tiny_dataset: SpriteDataset) -> None:
        """Test the channel-first view."""
        chw = tiny_dataset.images_chw([0, 2])
        assert chw.shape == (2, 3, IMAGE_SIZE, IMAGE_SIZE)
        np.testing.assert_allclose(chw[1, 0], tiny_dataset.images[2, :, :, 0], rtol=1e-6)

    def test_subset(self, tiny_dataset: SpriteDataset) -> None:
        """Test subsets keep rows aligned."""
        sub = tiny_dataset.subset([5, 1])
        assert len(sub) == 2
        assert int(sub.attrs[0]) == int(tiny_dataset.attrs[5])

    def test_shape_validation(self) -> None:
        """Test masks must match images."""
        with pytest.raises(ShapeError):
            SpriteDataset(np.zeros((2, 4, 4, 3)), np.zeros((2, 5, 4, 5)), np.zeros(2))

    def test_empty(self) -> None:
        """Test empty datasets are valid."""
        assert len(SpriteDataset.empty()) == 0
