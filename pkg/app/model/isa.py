"""
Invertible mixing layer between latent and source space.

Sources are s = A^-1 z and latents z = A s. A is a free dense matrix; its
inverse is computed by LU decomposition with partial pivoting (in float64)
and cached against the parameter's version counter.
"""

from __future__ import annotations

import numpy as np

from app.core.errors import IllConditionedMixingError, ShapeError
from app.core.logging import get_logger
from app.tensor import ops
from app.tensor.tensor import Tensor, as_tensor, record_op

logger = get_logger(__name__)

PIVOT_TOLERANCE = 1e-8
MAX_CONDITION = 1e6


def lu_decompose(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Factor P A = L U with partial pivoting.

    Returns:
        (perm, L, U) where ``perm`` lists the source row of every row of P A

    Raises:
        IllConditionedMixingError: If a pivot magnitude falls below 1e-8
    """
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"LU needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    u = np.array(a, dtype=np.float64, copy=True)
    lower = np.eye(n)
    perm = np.arange(n)

    for i in range(n):
        pivot_row = i + int(np.argmax(np.abs(u[i:, i])))
        pivot = u[pivot_row, i]
        if abs(pivot) < PIVOT_TOLERANCE:
            raise IllConditionedMixingError(
                f"Mixing matrix is singular: pivot {abs(pivot):.3e} in column {i}",
                column=i,
                pivot=float(abs(pivot)),
            )
        if pivot_row != i:
            u[[i, pivot_row]] = u[[pivot_row, i]]
            perm[[i, pivot_row]] = perm[[pivot_row, i]]
            lower[[i, pivot_row], :i] = lower[[pivot_row, i], :i]
        factors = u[i + 1 :, i] / pivot
        lower[i + 1 :, i] = factors
        u[i + 1 :, i:] -= np.outer(factors, u[i, i:])

    return perm, lower, u


def lu_inverse(a: np.ndarray) -> np.ndarray:
    """Invert ``a`` through its LU factors by forward and back substitution."""
    perm, lower, upper = lu_decompose(a)
    n = a.shape[0]
    rhs = np.eye(n)[perm]

    y = np.zeros((n, n))
    for i in range(n):
        y[i] = rhs[i] - lower[i, :i] @ y[:i]

    x = np.zeros((n, n))
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - upper[i, i + 1 :] @ x[i + 1 :]) / upper[i, i]
    return x


def condition_number_1(a: np.ndarray, a_inv: np.ndarray) -> float:
    """1-norm condition number ||A||_1 * ||A^-1||_1."""
    return float(np.abs(a).sum(axis=0).max() * np.abs(a_inv).sum(axis=0).max())


class MixingMatrix:
    """
    Learnable mixing matrix A with a version-stamped cached inverse.

    Attributes:
        weight: Parameter tensor A (d x d)
        inverse: Cached A^-1 in the parameter dtype
        stamp: ``weight.version`` at the time ``inverse`` was computed
    """

    def __init__(self, weight: Tensor) -> None:
        if weight.ndim != 2 or weight.shape[0] != weight.shape[1]:
            raise ShapeError(f"Mixing matrix must be square, got shape {weight.shape}")
        self.weight = weight
        self.inverse = np.eye(weight.shape[0], dtype=weight.data.dtype)
        self.stamp = -1
        self.condition = 1.0
        self.refresh_inverse()

    @classmethod
    def initialize(cls, d: int, rng: np.random.Generator, noise: float = 0.01) -> MixingMatrix:
        """A = I + noise * N(0, 1)."""
        return cls(Tensor.parameter(np.eye(d) + noise * rng.standard_normal((d, d)), name="isa.A"))

    @property
    def is_current(self) -> bool:
        return self.stamp == self.weight.version

    def refresh_inverse(self) -> np.ndarray:
        """
        Recompute and stamp the cached inverse.

        Raises:
            IllConditionedMixingError: On a tiny pivot or a condition estimate above 1e6
        """
        a = self.weight.data.astype(np.float64)
        a_inv = lu_inverse(a)
        condition = condition_number_1(a, a_inv)
        if not np.isfinite(condition) or condition > MAX_CONDITION:
            raise IllConditionedMixingError(
                f"Mixing matrix is ill-conditioned: cond_1 = {condition:.3e}",
                condition=condition,
            )
        self.inverse = a_inv.astype(self.weight.data.dtype)
        self.condition = condition
        self.stamp = self.weight.version
        return self.inverse

    def _current_inverse(self) -> np.ndarray:
        if not self.is_current:
            logger.debug("Refreshing stale mixing inverse", extra={"version": self.weight.version})
            self.refresh_inverse()
        return self.inverse

    def to_sources(self, z: Tensor) -> Tensor:
        """s = A^-1 z for a vector (d,) or a batch (B, d)."""
        z = as_tensor(z)
        d = self.weight.shape[0]
        if z.shape[-1:] != (d,) or z.ndim > 2:
            raise ShapeError(f"to_sources: latent shape {z.shape} does not match d={d}")
        a_inv = self._current_inverse()
        s = z.data @ a_inv.T
        weight = self.weight

        def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            g2, s2 = np.atleast_2d(g), np.atleast_2d(s)
            grad_z = g @ a_inv
            # d(A^-1) = -A^-1 dA A^-1
            grad_a = -a_inv.T @ g2.T @ s2
            return grad_z, grad_a.astype(weight.data.dtype)

        return record_op("to_sources", s, (z, weight), backward)

    def to_latent(self, s: Tensor) -> Tensor:
        """z = A s for a vector (d,) or a batch (B, d)."""
        s = as_tensor(s)
        d = self.weight.shape[0]
        if s.shape[-1:] != (d,) or s.ndim > 2:
            raise ShapeError(f"to_latent: source shape {s.shape} does not match d={d}")
        if s.ndim == 1:
            return ops.matmul(self.weight, s.reshape(d, 1)).reshape(d)
        return ops.matmul(s, ops.transpose(self.weight))

    def identity_error(self) -> float:
        """max |A A^-1 - I|, the cache health check."""
        a = self.weight.data.astype(np.float64)
        return float(np.abs(a @ self._current_inverse().astype(np.float64) - np.eye(a.shape[0])).max())
