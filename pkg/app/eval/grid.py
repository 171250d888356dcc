"""
Mixing grids: decoded subspace swaps between a few source images, tiled
row-major with one-pixel white separators.
"""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import numpy as np

from app.core.errors import ConfigurationError, ShapeError
from app.eval.inference import chw_to_hwc
from app.losses.mixing import MixSpec, mix_sources
from app.model.networks import IMAGE_SHAPE, SubspaceAutoencoder
from app.synthdata.ppm import export_ppm
from app.tensor.tensor import as_tensor

SEPARATOR = 1.0
MIN_IMAGES, MAX_IMAGES = 1, 3


def default_grid_assignments(num_images: int, num_subspaces: int = 5) -> list[list[MixSpec]]:
    """
    One row per image r, mixing it with donor (r + 1) % n.

    Columns: all subspaces from r, then r with subspace c taken from the
    donor for every c, then all subspaces from the donor.
    """
    if not MIN_IMAGES <= num_images <= MAX_IMAGES:
        raise ConfigurationError(f"Mixing grids take 1 to 3 images, got {num_images}")
    rows = []
    for base in range(num_images):
        donor = (base + 1) % num_images
        row = [MixSpec.multiway([base] * num_subspaces)]
        for c in range(num_subspaces):
            assignment = [base] * num_subspaces
            assignment[c] = donor
            row.append(MixSpec.multiway(assignment))
        row.append(MixSpec.multiway([donor] * num_subspaces))
        rows.append(row)
    return rows


def tile(cells: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    """
    Lay out equally sized (H, W, 3) cells row-major, separated by one white pixel.

    Returns:
        (rows * H + rows - 1, cols * W + cols - 1, 3) image
    """
    if not cells or not cells[0]:
        raise ShapeError("Grid needs at least one cell")
    cols = len(cells[0])
    if any(len(row) != cols for row in cells):
        raise ShapeError("Grid rows must all have the same number of cells")
    height, width = cells[0][0].shape[:2]
    rows = len(cells)
    grid = np.full((rows * height + rows - 1, cols * width + cols - 1, 3), SEPARATOR)
    for r, row in enumerate(cells):
        for c, cell in enumerate(row):
            if cell.shape != (height, width, 3):
                raise ShapeError(f"Grid cell ({r}, {c}) has shape {cell.shape}")
            top, left = r * (height + 1), c * (width + 1)
            grid[top : top + height, left : left + width] = cell
    return grid


def mix_grid(
    model: SubspaceAutoencoder,
    images: Sequence[np.ndarray],
    assignments: Sequence[Sequence[MixSpec]],
    path: Path | None = None,
    include_originals: bool = False,
) -> np.ndarray:
    """
    Decode one mix per grid cell.

    Args:
        images: 1 to 3 channel-first (3, 32, 32) source images
        assignments: Rows of multi-way MixSpecs over ``images``
        path: Also export the grid as PPM
        include_originals: Frame each row with the raw source images of its
            first and last cell

    Returns:
        The grid as (H, W, 3)
    """
    if not MIN_IMAGES <= len(images) <= MAX_IMAGES:
        raise ConfigurationError(f"Mixing grids take 1 to 3 images, got {len(images)}")
    stacked = np.stack([np.asarray(img) for img in images])
    if stacked.shape[1:] != IMAGE_SHAPE:
        raise ShapeError(f"Grid images must be {IMAGE_SHAPE}, got {stacked.shape[1:]}")

    layout = model.layout
    sources = model.to_sources(model.encode(stacked)).data
    per_image = [sources[j] for j in range(len(images))]

    rows: list[list[np.ndarray]] = []
    for row_specs in assignments:
        mixed = np.stack([mix_sources(per_image, spec, layout).data for spec in row_specs])
        decoded = chw_to_hwc(model.decode(model.to_latent(as_tensor(mixed))).data)
        row = list(decoded)
        if include_originals:
            first = row_specs[0].resolve(layout, len(images))[0]
            last = row_specs[-1].resolve(layout, len(images))[-1]
            row = [chw_to_hwc(stacked[first])] + row + [chw_to_hwc(stacked[last])]
        rows.append(row)

    grid = tile(rows)
    if path is not None:
        export_ppm(grid, path)
    return grid
