"""
Adam optimizer over named parameter tensors.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from app.core.errors import ConfigurationError, DivergedTrainingError
from app.core.logging import get_logger
from app.tensor.tensor import Tensor

logger = get_logger(__name__)


@dataclass
class AdamState:
    """First/second moment estimates keyed by parameter name, plus the step count."""

    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def validate(self, params: Mapping[str, Tensor]) -> None:
        """Check that stored moments match the parameters they belong to."""
        if self.step < 0:
            raise ConfigurationError(f"Adam step counter must be >= 0, got {self.step}")
        for name, moments in (("m", self.m), ("v", self.v)):
            for key, arr in moments.items():
                if key not in params:
                    raise ConfigurationError(f"Adam state '{name}' has unknown parameter {key!r}")
                if arr.shape != params[key].shape:
                    raise ConfigurationError(
                        f"Adam state '{name}' for {key!r} has shape {arr.shape}, "
                        f"parameter has {params[key].shape}",
                        parameter=key,
                    )


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray | None],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """
    Apply one bias-corrected Adam update in place.

    Parameters without a gradient are treated as having a zero gradient, so
    their moments still decay. Every updated parameter has its ``version``
    bumped.

    Args:
        params: Parameter tensors by name
        grads: Gradient arrays by name (missing/None means zero)
        state: Optimizer state, updated in place
        lr: Learning rate
        beta1: First moment decay
        beta2: Second moment decay
        eps: Denominator offset

    Returns:
        The updated state

    Raises:
        DivergedTrainingError: If any gradient holds NaN or Inf; nothing is updated
    """
    state.validate(params)

    for name, grad in grads.items():
        if grad is not None and not np.all(np.isfinite(grad)):
            raise DivergedTrainingError(
                f"Non-finite gradient for parameter {name!r}", parameter=name, step=state.step
            )

    state.step += 1
    bc1 = 1.0 - beta1**state.step
    bc2 = 1.0 - beta2**state.step
    step_size = lr / bc1

    for name, param in params.items():
        grad = grads.get(name)
        g = np.zeros_like(param.data) if grad is None else grad.astype(param.data.dtype, copy=False)

        if name not in state.m:
            state.m[name] = np.zeros_like(param.data)
            state.v[name] = np.zeros_like(param.data)

        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)

        denom = np.sqrt(v * (1.0 / bc2)) + eps
        param.data -= (step_size * m / denom).astype(param.data.dtype, copy=False)
        param.version += 1

    return state
