"""Mixing error, subspace attribute analysis, attribute editing and mixing grids."""

from app.eval.attributes import (
    SubspaceAnalysis,
    attribute_direction,
    attribute_edit,
    attribute_separation,
    classifier_accuracy,
)
from app.eval.grid import default_grid_assignments, mix_grid
from app.eval.mixing import MixingErrorReport, mixing_error
from app.eval.pca import PCAResult, jacobi_eigh, pca3
from app.eval.reports import write_report

__all__ = [
    "MixingErrorReport",
    "PCAResult",
    "SubspaceAnalysis",
    "attribute_direction",
    "attribute_edit",
    "attribute_separation",
    "classifier_accuracy",
    "default_grid_assignments",
    "jacobi_eigh",
    "mix_grid",
    "mixing_error",
    "pca3",
    "write_report",
]
