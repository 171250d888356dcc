"""
Unit tests for the SDS1 dataset codec and PPM export.
"""

import logging
from pathlib import Path

import numpy as np
import pytest

from app.core.errors import DatasetFormatError, FormatError, MissingFileError, ShapeError
from app.synthdata.dataset import SpriteDataset
from app.synthdata.dataset_io import (
    HEADER,
    MAGIC,
    decode_dataset,
    encode_dataset,
    quantize,
    read_dataset,
    write_dataset,
)
from app.synthdata.ppm import encode_ppm, export_ppm, read_ppm


@pytest.fixture
def small(tiny_dataset: SpriteDataset) -> SpriteDataset:
    return tiny_dataset.subset(range(4))


@pytest.mark.unit
class TestQuantize:
    """Test 8-bit quantization."""

    def test_round_half_up(self) -> None:
        """Test floor(v * 255 + 0.5) with clamping."""
        values = np.array([0.0, 1.0, 0.6 / 255, 0.4 / 255, -0.2, 1.7])
        assert quantize(values).tolist() == [0, 255, 1, 0, 0, 255]


@pytest.mark.unit
class TestDatasetCodec:
    """Test encoding and decoding."""

    def test_header_layout(self, small: SpriteDataset) -> None:
        """Test the header fields and total size."""
        payload = encode_dataset(small)
        magic, version, count, height, width, channels, parts = HEADER.unpack_from(payload)
        assert (magic, version, count, height, width, channels, parts) == (MAGIC, 1, 4, 32, 32, 3, 5)
        record = 32 * 32 * 3 + 5 * 32 * 32 + 4
        assert len(payload) == HEADER.size + 4 * record

    def test_round_trip_is_quantization(self, small: SpriteDataset) -> None:
        """Test decode(encode(x)) equals the quantized values of x."""
        decoded = decode_dataset(encode_dataset(small))
        np.testing.assert_array_equal(decoded.images, quantize(small.images) / 255.0)
        np.testing.assert_array_equal(decoded.masks, quantize(small.masks) / 255.0)
        np.testing.assert_array_equal(decoded.attrs, small.attrs)

    def test_reencode_is_byte_identical(self, small: SpriteDataset) -> None:
        """Test write(read(write(x))) reproduces the file."""
        payload = encode_dataset(small)
        assert encode_dataset(decode_dataset(payload)) == payload

    def test_empty_dataset(self) -> None:
        """Test a zero-count file is valid."""
        assert len(decode_dataset(encode_dataset(SpriteDataset.empty()))) == 0

    def test_bad_magic(self, small: SpriteDataset) -> None:
        """Test wrong magic bytes are rejected."""
        payload = b"XXXX" + encode_dataset(small)[4:]
        with pytest.raises(DatasetFormatError, match="bad magic"):
            decode_dataset(payload)

    def test_unsupported_version(self, small: SpriteDataset) -> None:
        """Test an unknown version is rejected."""
        payload = bytearray(encode_dataset(small))
        payload[4] = 2
        with pytest.raises(DatasetFormatError, match="version"):
            decode_dataset(bytes(payload))

    def test_truncated(self, small: SpriteDataset) -> None:
        """Test a short payload is rejected."""
        with pytest.raises(DatasetFormatError, match="truncated"):
            decode_dataset(encode_dataset(small)[:-1])

    def test_truncated_header(self) -> None:
        """Test a payload shorter than the header."""
        with pytest.raises(DatasetFormatError):
            decode_dataset(b"SDS1")

    def test_trailing_bytes(self, small: SpriteDataset) -> None:
        """Test extra bytes after the last record are rejected."""
        with pytest.raises(DatasetFormatError, match="trailing"):
            decode_dataset(encode_dataset(small) + b"\0")

    def test_format_errors_are_format_errors(self) -> None:
        """Test the dataset error is a FormatError."""
        assert issubclass(DatasetFormatError, FormatError)


@pytest.mark.unit
class TestDatasetFiles:
    """Test file helpers."""

    def test_write_read(self, small: SpriteDataset, tmp_path: Path) -> None:
        """Test files round-trip and parent directories are created."""
        path = write_dataset(small, tmp_path / "nested" / "data.sds")
        assert len(read_dataset(path)) == 4

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test a missing file raises MissingFileError."""
        with pytest.raises(MissingFileError):
            read_dataset(tmp_path / "absent.sds")


@pytest.mark.unit
class TestPPM:
    """Test P6 export."""

    def test_header_and_size(self) -> None:
        """Test the header carries width before height."""
        payload = encode_ppm(np.zeros((2, 5, 3)))
        assert payload.startswith(b"P6\n5 2\n255\n")
        assert len(payload) == len(b"P6\n5 2\n255\n") + 2 * 5 * 3

    def test_round_trip(self, tmp_path: Path, rng: np.random.Generator) -> None:
        """Test export/read gives the quantized pixels."""
        image = rng.uniform(size=(4, 6, 3))
        pixels = read_ppm(export_ppm(image, tmp_path / "img.ppm"))
        np.testing.assert_array_equal(pixels, quantize(image))

    def test_clamps_with_warning(self, caplog: pytest.LogCaptureFixture) -> None:
        """Test out-of-range values are clamped and logged."""
        with caplog.at_level(logging.WARNING, logger="app.synthdata.ppm"):
            payload = encode_ppm(np.full((1, 1, 3), 1.5))
        assert payload.endswith(b"\xff\xff\xff")
        assert "Clamping" in caplog.text

    def test_non_finite_rejected(self) -> None:
        """Test NaN pixels are an error."""
        with pytest.raises(ShapeError):
            encode_ppm(np.full((1, 1, 3), np.nan))

    def test_wrong_shape(self) -> None:
        """Test channel-first input is rejected."""
        with pytest.raises(ShapeError):
            encode_ppm(np.zeros((3, 4, 4)))

    def test_read_rejects_other_formats(self, tmp_path: Path) -> None:
        """Test non-P6 files are rejected."""
        path = tmp_path / "x.ppm"
        path.write_bytes(b"P3\n1 1\n255\n0 0 0")
        with pytest.raises(FormatError):
            read_ppm(path)
