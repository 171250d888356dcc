"""
SDS1 sprite dataset codec.

File layout (little-endian):
- Header: magic "SDS1", u32 version=1, u32 count, u16 H, u16 W,
  u8 channels=3, u8 num_parts=5
- Per record: image H*W*3 u8 (row-major HWC), masks 5*H*W u8,
  u32 attribute bitfield (bit 0 = mouth_open)

Real values are quantized as floor(v * 255 + 0.5), clamped to [0, 255].
Reading a file and writing it again reproduces it byte for byte.
"""

import struct
from pathlib import Path

import numpy as np

from app.core.errors import DatasetFormatError, MissingFileError
from app.core.logging import get_logger
from app.synthdata.dataset import NUM_PARTS, SpriteDataset

logger = get_logger(__name__)

MAGIC = b"SDS1"
VERSION = 1
CHANNELS = 3
HEADER = struct.Struct("<4sIIHHBB")


def quantize(values: np.ndarray) -> np.ndarray:
    """Map reals in [0, 1] to bytes with round-half-up."""
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(
        np.uint8
    )


def dequantize(values: np.ndarray) -> np.ndarray:
    return values.astype(np.float64) / 255.0


def _record_dtype(height: int, width: int) -> np.dtype:
    return np.dtype(
        [
            ("image", np.uint8, (height, width, CHANNELS)),
            ("masks", np.uint8, (NUM_PARTS, height, width)),
            ("attrs", "<u4"),
        ]
    )


def encode_dataset(dataset: SpriteDataset) -> bytes:
    """Serialize a dataset to SDS1 bytes."""
    records = np.zeros(len(dataset), dtype=_record_dtype(dataset.height, dataset.width))
    records["image"] = quantize(dataset.images)
    records["masks"] = quantize(dataset.masks)
    records["attrs"] = dataset.attrs
    header = HEADER.pack(
        MAGIC, VERSION, len(dataset), dataset.height, dataset.width, CHANNELS, NUM_PARTS
    )
    return header + records.tobytes()


def decode_dataset(payload: bytes, source: str = "<bytes>") -> SpriteDataset:
    """
    Parse SDS1 bytes.

    Raises:
        DatasetFormatError: On bad magic, unsupported version/layout, or a
            payload whose length disagrees with the header
    """
    if len(payload) < HEADER.size:
        raise DatasetFormatError(
            f"{source}: truncated header ({len(payload)} of {HEADER.size} bytes)", path=source
        )
    magic, version, count, height, width, channels, parts = HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise DatasetFormatError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}", path=source)
    if version != VERSION:
        raise DatasetFormatError(
            f"{source}: unsupported version {version}, expected {VERSION}", path=source
        )
    if channels != CHANNELS or parts != NUM_PARTS:
        raise DatasetFormatError(
            f"{source}: unsupported layout channels={channels} parts={parts}", path=source
        )

    record_dtype = _record_dtype(height, width)
    expected = HEADER.size + count * record_dtype.itemsize
    if len(payload) != expected:
        kind = "truncated" if len(payload) < expected else "trailing bytes in"
        raise DatasetFormatError(
            f"{source}: {kind} file ({len(payload)} bytes, header implies {expected})",
            path=source,
        )

    records = np.frombuffer(payload, dtype=record_dtype, count=count, offset=HEADER.size)
    return SpriteDataset(
        dequantize(records["image"]),
        dequantize(records["masks"]),
        records["attrs"].astype(np.uint32),
    )


def write_dataset(dataset: SpriteDataset, path: Path) -> Path:
    """Write a dataset file, creating parent directories."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(encode_dataset(dataset))
    logger.debug("Dataset file written", extra={"path": str(out), "count": len(dataset)})
    return out


def read_dataset(path: Path) -> SpriteDataset:
    """
    Read a dataset file.

    Raises:
        MissingFileError: If the file does not exist
        DatasetFormatError: If the file is malformed
    """
    src = Path(path)
    if not src.is_file():
        raise MissingFileError(f"Dataset file not found: {src}", path=str(src))
    return decode_dataset(src.read_bytes(), source=str(src))
