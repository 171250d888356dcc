"""Binary PPM (P6) export."""

from pathlib import Path

import numpy as np

from app.core.errors import FormatError, ShapeError
from app.core.logging import get_logger
from app.synthdata.dataset_io import quantize

logger = get_logger(__name__)


def encode_ppm(image: np.ndarray) -> bytes:
    """
    Encode an H x W x 3 image with values in [0, 1] as 8-bit P6.

    Out-of-range values are clamped with a warning.
    """
    pixels = np.asarray(image, dtype=np.float64)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ShapeError(f"PPM export needs an (H, W, 3) image, got {pixels.shape}")
    if not np.all(np.isfinite(pixels)):
        raise ShapeError("PPM export received non-finite pixel values")

    low, high = float(pixels.min(initial=0.0)), float(pixels.max(initial=0.0))
    if low < 0.0 or high > 1.0:
        logger.warning(
            "Clamping out-of-range pixel values",
            extra={"min_value": low, "max_value": high},
        )
        pixels = np.clip(pixels, 0.0, 1.0)

    height, width = pixels.shape[:2]
    return b"P6\n%d %d\n255\n" % (width, height) + quantize(pixels).tobytes()


def export_ppm(image: np.ndarray, path: Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(encode_ppm(image))
    return out


def read_ppm(path: Path) -> np.ndarray:
    """Read a P6 file written by ``export_ppm`` back into H x W x 3 bytes."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P6" or parts[2] != b"255":
        raise FormatError(f"{path}: not an 8-bit P6 file written by this tool")
    width, height = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(height, width, 3)
