"""
Central finite-difference gradient checks for the tensor core.
"""

from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from app.tensor.tensor import Graph, Tensor


@dataclass(frozen=True)
class CheckPrecision:
    """Finite-difference step and accepted relative error for one tensor dtype."""

    dtype: str
    eps: float
    tolerance: float


PRECISIONS = (
    CheckPrecision("float64", eps=1e-5, tolerance=1e-6),
    CheckPrecision("float32", eps=1e-3, tolerance=1e-3),
)


def analytic_gradients(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """Backpropagate ``loss_fn()`` once; parameters without a gradient get zeros."""
    for p in params.values():
        p.zero_grad()
    with Graph() as graph:
        loss = loss_fn()
    graph.backward(loss)
    return {
        name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
        for name, p in params.items()
    }


def numeric_gradient(
    loss_fn: Callable[[], Tensor],
    param: Tensor,
    indices: list[tuple[int, ...]],
    eps: float = 1e-5,
) -> np.ndarray:
    """
    Central differences of ``loss_fn`` at the given entries of ``param``.

    The divisor is the step actually stored, which differs from ``2 * eps``
    after rounding to float32.
    """
    values = np.zeros(len(indices))
    for k, idx in enumerate(indices):
        original = param.data[idx]
        param.data[idx] = original + eps
        param.version += 1
        high = float(param.data[idx])
        plus = loss_fn().item()
        param.data[idx] = original - eps
        param.version += 1
        low = float(param.data[idx])
        minus = loss_fn().item()
        param.data[idx] = original
        param.version += 1
        values[k] = (plus - minus) / (high - low)
    return values


def sample_indices(shape: tuple[int, ...], count: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    size = int(np.prod(shape))
    flat = rng.choice(size, size=min(count, size), replace=False)
    return [tuple(int(i) for i in np.unravel_index(f, shape)) for f in flat]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / (||a|| + ||n||), 0 when both vanish."""
    denom = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric)) / denom


def gradient_check(
    loss_fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    entries_per_param: int = 12,
    seed: int = 0,
    eps: float = 1e-5,
) -> dict[str, float]:
    """
    Relative error between backprop and finite differences per parameter.

    ``loss_fn`` must rebuild the loss from the current parameter values on
    every call. The default step suits float64; pass ``eps=1e-3`` for float32.
    """
    rng = np.random.default_rng(seed)
    grads = analytic_gradients(loss_fn, params)
    errors = {}
    for name, param in params.items():
        indices = sample_indices(param.shape, entries_per_param, rng)
        numeric = numeric_gradient(loss_fn, param, indices, eps)
        analytic = np.array([grads[name][idx] for idx in indices])
        errors[name] = relative_error(analytic, numeric)
    return errors
