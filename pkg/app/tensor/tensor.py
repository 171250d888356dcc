"""
Dense tensors with define-by-run reverse-mode differentiation.

Every differentiable op executed while a ``Graph`` is active is appended to
that graph; ``backward`` walks the recorded nodes in exact reverse execution
order. Outside an active graph ops evaluate eagerly and record nothing, which
is the no-grad mode used for evaluation.
"""

from __future__ import annotations

import contextvars
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any

import numpy as np

from app.core.errors import GraphError, ShapeError
from app.core.logging import get_logger

logger = get_logger(__name__)

_SUPPORTED_DTYPES = {"float32": np.dtype(np.float32), "float64": np.dtype(np.float64)}
_default_dtype: np.dtype = _SUPPORTED_DTYPES["float32"]

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


def get_default_dtype() -> np.dtype:
    """Return the real dtype every new tensor is created with."""
    return _default_dtype


def set_default_dtype(dtype: Any) -> None:
    """
    Switch the global precision of the tensor core.

    Args:
        dtype: "float32"/"float64" or the matching numpy type
    """
    global _default_dtype
    resolved = np.dtype(dtype)
    if resolved.name not in _SUPPORTED_DTYPES:
        raise ShapeError(f"Unsupported tensor dtype: {resolved.name}")
    _default_dtype = resolved


@contextmanager
def precision(dtype: Any) -> Iterator[None]:
    """Temporarily run the tensor core at another precision."""
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


class Tensor:
    """
    N-dimensional real array with an optional gradient.

    Leaf tensors created with ``requires_grad=True`` (parameters) accumulate
    gradients into ``grad``; intermediate results only hold a reference to
    the graph that produced them.
    """

    __array_priority__ = 100

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: str | None = None,
    ) -> None:
        self.data: np.ndarray = np.asarray(data, dtype=_default_dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self.version = 0
        self._graph: Graph | None = None

    @classmethod
    def parameter(cls, data: Any, name: str) -> Tensor:
        """Create a trainable leaf tensor owning a private copy of ``data``."""
        return cls(np.array(data, dtype=_default_dtype, copy=True), requires_grad=True, name=name)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self._graph is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """Add ``grad`` into this tensor's gradient (accumulates across calls)."""
        if grad.shape != self.data.shape:
            raise ShapeError(
                f"Gradient shape {grad.shape} does not match tensor shape {self.data.shape}",
                tensor=self.name,
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad = self.grad + grad.astype(self.data.dtype, copy=False)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}{label})"

    # Operator sugar, see app.tensor.ops for the implementations
    def __add__(self, other: Any) -> Tensor:
        return _ops.add(self, other)

    def __radd__(self, other: Any) -> Tensor:
        return _ops.add(other, self)

    def __sub__(self, other: Any) -> Tensor:
        return _ops.sub(self, other)

    def __rsub__(self, other: Any) -> Tensor:
        return _ops.sub(other, self)

    def __mul__(self, other: Any) -> Tensor:
        return _ops.mul(self, other)

    def __rmul__(self, other: Any) -> Tensor:
        return _ops.mul(other, self)

    def __neg__(self) -> Tensor:
        return _ops.scale(self, -1.0)

    def __truediv__(self, other: float) -> Tensor:
        return _ops.scale(self, 1.0 / float(other))

    def __matmul__(self, other: Tensor) -> Tensor:
        return _ops.matmul(self, other)

    def __getitem__(self, key: Any) -> Tensor:
        return _ops.getitem(self, key)

    def reshape(self, *shape: int) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _ops.reshape(self, shape)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return _ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return _ops.mean(self, axis=axis, keepdims=keepdims)

    @property
    def T(self) -> Tensor:
        return _ops.transpose(self)


@dataclass(eq=False)
class Node:
    """One executed operation: its output, inputs and vector-Jacobian product."""

    op: str
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward: BackwardFn


_active_graph: contextvars.ContextVar[Graph | None] = contextvars.ContextVar(
    "active_graph", default=None
)


class Graph:
    """
    Ordered record of executed operations.

    Used as a context manager; the graph is rebuilt for every training step.

    Examples:
        >>> with Graph() as graph:
        ...     loss = (w * x).sum()
        >>> graph.backward(loss)
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._token: contextvars.Token[Graph | None] | None = None

    def __enter__(self) -> Graph:
        self._token = _active_graph.set(self)
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        if self._token is not None:
            _active_graph.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    @staticmethod
    def active() -> Graph | None:
        """Return the graph currently recording, if any."""
        return _active_graph.get()

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def backward(self, loss: Tensor) -> None:
        """
        Propagate d(loss)/d(.) back to every reachable parameter.

        Gradients are added to ``grad`` of leaf tensors, so repeated calls
        without resetting accumulate.

        Raises:
            GraphError: If the loss is not a scalar or was not recorded here
        """
        if loss.data.size != 1:
            raise GraphError(f"backward() needs a scalar loss, got shape {loss.shape}")
        if not self.nodes:
            raise GraphError("backward() called on an empty graph")
        if loss._graph is not self:
            raise GraphError("Loss tensor was not recorded on this graph")

        pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            grad_out = pending.pop(id(node.output), None)
            if grad_out is None:
                continue
            input_grads = node.backward(grad_out)
            for parent, grad in zip(node.inputs, input_grads):
                if grad is None or not parent.requires_grad:
                    continue
                if parent.is_leaf:
                    parent.accumulate_grad(grad)
                    continue
                key = id(parent)
                previous = pending.get(key)
                pending[key] = grad if previous is None else previous + grad


def as_tensor(value: Any) -> Tensor:
    """Wrap arrays and scalars as constant tensors; tensors pass through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def record_op(
    op: str,
    data: np.ndarray,
    inputs: Sequence[Tensor],
    backward: BackwardFn,
    track: bool = True,
) -> Tensor:
    """
    Create the output tensor of an op and record it on the active graph.

    Args:
        op: Op name (for inspection)
        data: Forward result
        inputs: Input tensors, in the order ``backward`` returns gradients
        backward: Maps the output gradient to one gradient (or None) per input
        track: False marks the output as a gradient barrier

    Returns:
        Output tensor
    """
    graph = Graph.active()
    requires = track and graph is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires)
    if graph is not None and (requires or not track):
        out._graph = graph if requires else None
        graph.record(Node(op, out, tuple(inputs), backward))
    return out


def backward(loss: Tensor) -> None:
    """
    Backpropagate from a scalar loss through the graph that produced it.

    Raises:
        GraphError: If the loss is not scalar or not attached to a graph
    """
    if loss.data.size != 1:
        raise GraphError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if loss._graph is None:
        raise GraphError("Loss is not attached to a recording graph")
    loss._graph.backward(loss)


from app.tensor import ops as _ops  # noqa: E402
