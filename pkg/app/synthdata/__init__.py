"""Procedural face sprites with ground-truth part masks and labels."""

from app.synthdata.dataset import (
    ATTRIBUTE_NAMES,
    NUM_PARTS,
    PART_NAMES,
    Sprite,
    SpriteDataset,
    attribute_bit,
)
from app.synthdata.dataset_io import read_dataset, write_dataset
from app.synthdata.generator import GenParams, SpriteRecipe, generate, generate_one, render
from app.synthdata.ppm import export_ppm

__all__ = [
    "ATTRIBUTE_NAMES",
    "PART_NAMES",
    "NUM_PARTS",
    "Sprite",
    "SpriteDataset",
    "SpriteRecipe",
    "GenParams",
    "attribute_bit",
    "generate",
    "generate_one",
    "render",
    "read_dataset",
    "write_dataset",
    "export_ppm",
]
