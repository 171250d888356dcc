"""
Three-component PCA on a cyclic Jacobi eigensolver.

Subspaces are at most a dozen dimensions wide, so a dense Jacobi sweep is
exact enough (off-diagonal mass below 1e-10) and has no LAPACK dependence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.core.errors import ConfigurationError
from app.core.logging import get_logger

logger = get_logger(__name__)

JACOBI_TOLERANCE = 1e-10
MAX_SWEEPS = 100
NUM_COMPONENTS = 3


def jacobi_eigh(matrix: np.ndarray, tol: float = JACOBI_TOLERANCE) -> tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps rotate every (p, q) pair in row order until the off-diagonal
    Frobenius norm is at most ``tol`` times the matrix norm.

    Returns:
        (eigenvalues descending, eigenvectors as columns in the same order)
    """
    a = np.array(matrix, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError(f"jacobi_eigh needs a square matrix, got {a.shape}")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(float(np.linalg.norm(a)), np.finfo(np.float64).tiny)

    for _ in range(MAX_SWEEPS):
        off = np.sqrt(max(float(np.sum(a * a) - np.sum(np.diag(a) ** 2)), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= np.finfo(np.float64).eps * scale * 1e-3:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    else:
        logger.warning("Jacobi eigensolver hit the sweep limit", extra={"sweeps": MAX_SWEEPS})

    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]


@dataclass(frozen=True)
class PCAResult:
    """
    Attributes:
        axes: (3, d_i) orthonormal principal directions, rows by decreasing variance
        projected: (N, 3) centered samples in principal coordinates
        eigenvalues: (3,) variances along the axes
        mean: (d_i,) sample mean
        rank_deficient: Some axes span zero variance and are an arbitrary completion
    """

    axes: np.ndarray
    projected: np.ndarray
    eigenvalues: np.ndarray
    mean: np.ndarray
    rank_deficient: bool


def pca3(samples: np.ndarray) -> PCAResult:
    """
    Project samples onto their top three principal components.

    Each axis is sign-normalized so its largest-magnitude entry is positive.

    Raises:
        ConfigurationError: If there are 3 or fewer samples or fewer than 3 dimensions
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigurationError(f"pca3 expects an (N, d) matrix, got shape {x.shape}")
    n, dim = x.shape
    if n <= NUM_COMPONENTS:
        raise ConfigurationError(f"pca3 needs more than {NUM_COMPONENTS} samples, got {n}")
    if dim < NUM_COMPONENTS:
        raise ConfigurationError(f"pca3 needs at least {NUM_COMPONENTS} dimensions, got {dim}")

    mean = x.mean(axis=0)
    centered = x - mean
    covariance = centered.T @ centered / (n - 1)
    eigenvalues, vectors = jacobi_eigh(covariance)

    axes = vectors[:, :NUM_COMPONENTS].T.copy()
    for row in axes:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    top = eigenvalues[:NUM_COMPONENTS]

    threshold = 1e-12 * max(float(eigenvalues[0]), np.finfo(np.float64).tiny)
    rank_deficient = bool(np.any(top <= threshold))
    if rank_deficient:
        logger.warning(
            "Sample covariance has rank below 3; trailing axes are an arbitrary completion",
            extra={"eigenvalues": top},
        )

    return PCAResult(
        axes=axes,
        projected=centered @ axes.T,
        eigenvalues=np.maximum(top, 0.0),
        mean=mean,
        rank_deficient=rank_deficient,
    )
