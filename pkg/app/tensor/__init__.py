"""Dense numpy tensors with reverse-mode differentiation and Adam."""

from app.tensor import ops
from app.tensor.optim import AdamState, adam_step
from app.tensor.tensor import (
    Graph,
    Tensor,
    as_tensor,
    backward,
    get_default_dtype,
    precision,
    set_default_dtype,
)

__all__ = [
    "ops",
    "Tensor",
    "Graph",
    "as_tensor",
    "backward",
    "get_default_dtype",
    "set_default_dtype",
    "precision",
    "AdamState",
    "adam_step",
]
