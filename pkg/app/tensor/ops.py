"""
Differentiable operations of the tensor core.

Each op computes its forward result with numpy and registers a closure that
maps the output gradient to input gradients. Shapes are validated up front;
a mismatch is a configuration error naming both shapes.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.core.errors import ShapeError
from app.tensor.tensor import Tensor, as_tensor, record_op

Axis = int | tuple[int, ...] | None


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes that broadcasting expanded to reach ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(
            f"{op}: shapes {a.shape} and {b.shape} do not broadcast",
            op=op,
            shapes=[a.shape, b.shape],
        ) from e


# ----------------------------------------------------------------------------
# Elementwise arithmetic
# ----------------------------------------------------------------------------


def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return record_op("add", a.data + b.data, (a, b), backward)


def sub(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return record_op("sub", a.data - b.data, (a, b), backward)


def mul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return record_op("mul", a.data * b.data, (a, b), backward)


def scale(x: Any, c: float) -> Tensor:
    """Multiply by a Python scalar."""
    x = as_tensor(x)
    factor = x.data.dtype.type(c)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * factor,)

    return record_op("scale", x.data * factor, (x,), backward)


def add_scalar(x: Any, c: float) -> Tensor:
    x = as_tensor(x)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g,)

    return record_op("add_scalar", x.data + x.data.dtype.type(c), (x,), backward)


def square(x: Any) -> Tensor:
    x = as_tensor(x)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (2.0 * x.data * g,)

    return record_op("square", x.data * x.data, (x,), backward)


def maximum(a: Any, b: Any) -> Tensor:
    """Elementwise max; ties send the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("maximum", a, b)
    take_a = a.data >= b.data

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g * take_a, a.shape), _unbroadcast(g * ~take_a, b.shape)

    return record_op("maximum", np.where(take_a, a.data, b.data), (a, b), backward)


def minimum(a: Any, b: Any) -> Tensor:
    """Elementwise min; ties send the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("minimum", a, b)
    take_a = a.data <= b.data

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g * take_a, a.shape), _unbroadcast(g * ~take_a, b.shape)

    return record_op("minimum", np.where(take_a, a.data, b.data), (a, b), backward)


# ----------------------------------------------------------------------------
# Activations
# ----------------------------------------------------------------------------


def relu(x: Any) -> Tensor:
    x = as_tensor(x)
    active = x.data > 0

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * active,)

    return record_op("relu", np.where(active, x.data, 0).astype(x.data.dtype), (x,), backward)


def sigmoid(x: Any) -> Tensor:
    x = as_tensor(x)
    # tanh form never overflows and gives exactly 0.5 at 0
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * out * (1.0 - out),)

    return record_op("sigmoid", out, (x,), backward)


def softmax(x: Any) -> Tensor:
    """Softmax over the last axis."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return record_op("softmax", out, (x,), backward)


def log_softmax(x: Any) -> Tensor:
    """Numerically stable log of softmax over the last axis."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return record_op("log_softmax", out, (x,), backward)


# ----------------------------------------------------------------------------
# Linear algebra
# ----------------------------------------------------------------------------


def matmul(a: Any, b: Any) -> Tensor:
    """Matrix product of two 2-D tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul: shapes {a.shape} and {b.shape} are not aligned",
            op="matmul",
            shapes=[a.shape, b.shape],
        )

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g @ b.data.T, a.data.T @ g

    return record_op("matmul", a.data @ b.data, (a, b), backward)


def transpose(x: Any) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"transpose: expected a 2-D tensor, got shape {x.shape}")

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.T,)

    return record_op("transpose", x.data.T.copy(), (x,), backward)


def _conv_forward(
    x: np.ndarray, w: np.ndarray, stride: int, padding: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = w.shape[-1]
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))  # (N, Ho, Wo, O)
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2)), windows, xp


def conv2d(
    x: Any,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """
    2-D cross-correlation with zero padding.

    Args:
        x: Input of shape (N, C_in, H, W) or (C_in, H, W)
        weight: Kernel of shape (C_out, C_in, k, k)
        bias: Optional bias of shape (C_out,)
        stride: Step between output positions
        padding: Zero rows/columns added on every side

    Returns:
        Output of shape (N, C_out, H_out, W_out), batch axis dropped for 3-D input
    """
    x = as_tensor(x)
    single = x.ndim == 3
    if x.ndim not in (3, 4) or weight.ndim != 4:
        raise ShapeError(
            f"conv2d: input {x.shape} / kernel {weight.shape} must be (N,)C,H,W / O,C,k,k",
            op="conv2d",
            shapes=[x.shape, weight.shape],
        )
    x4 = x.data[None] if single else x.data
    out_c, in_c, kh, kw = weight.shape
    if x4.shape[1] != in_c or kh != kw:
        raise ShapeError(
            f"conv2d: input {x.shape} does not match kernel {weight.shape}",
            op="conv2d",
            shapes=[x.shape, weight.shape],
        )
    if bias is not None and bias.shape != (out_c,):
        raise ShapeError(
            f"conv2d: bias {bias.shape} does not match kernel {weight.shape}",
            op="conv2d",
            shapes=[bias.shape, weight.shape],
        )
    if x4.shape[2] + 2 * padding < kh or x4.shape[3] + 2 * padding < kw:
        raise ShapeError(f"conv2d: kernel {weight.shape} larger than padded input {x.shape}")

    out, windows, xp = _conv_forward(x4, weight.data, stride, padding)
    if bias is not None:
        out = out + bias.data.reshape(1, -1, 1, 1)
    n, _, h_out, w_out = out.shape
    height, width = x4.shape[2], x4.shape[3]

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        g4 = g[None] if single else g
        grad_w = np.tensordot(g4, windows, axes=([0, 2, 3], [0, 2, 3]))  # (O, C, k, k)
        # Adjoint of the windowed correlation: scatter every kernel tap back
        grad_windows = np.tensordot(g4, weight.data, axes=([1], [0]))  # (N, Ho, Wo, C, k, k)
        grad_xp = np.zeros(xp.shape, dtype=xp.dtype)
        for i in range(kh):
            rows = slice(i, i + stride * (h_out - 1) + 1, stride)
            for j in range(kw):
                cols = slice(j, j + stride * (w_out - 1) + 1, stride)
                grad_xp[:, :, rows, cols] += grad_windows[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        grad_x = grad_xp[:, :, padding : padding + height, padding : padding + width]
        if single:
            grad_x = grad_x[0]
        grads: list[np.ndarray | None] = [grad_x, grad_w]
        if bias is not None:
            grads.append(g4.sum(axis=(0, 2, 3)))
        return tuple(grads)

    inputs: tuple[Tensor, ...] = (x, weight) if bias is None else (x, weight, bias)
    return record_op("conv2d", out[0] if single else out, inputs, backward)


def upsample2x(x: Any) -> Tensor:
    """Nearest-neighbor 2x upsampling of the last two axes."""
    x = as_tensor(x)
    if x.ndim < 2:
        raise ShapeError(f"upsample2x: expected at least 2 axes, got shape {x.shape}")
    out = x.data.repeat(2, axis=-2).repeat(2, axis=-1)
    h, w = x.shape[-2:]

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(*g.shape[:-2], h, 2, w, 2).sum(axis=(-3, -1)),)

    return record_op("upsample2x", out, (x,), backward)


# ----------------------------------------------------------------------------
# Shape manipulation and reductions
# ----------------------------------------------------------------------------


def reshape(x: Any, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    target = tuple(int(s) for s in shape)
    try:
        out = x.data.reshape(target)
    except ValueError as e:
        raise ShapeError(
            f"reshape: cannot reshape {x.shape} into {target}", shapes=[x.shape, target]
        ) from e

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(x.shape),)

    return record_op("reshape", out, (x,), backward)


def concat(tensors: Sequence[Any], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat: nothing to concatenate")
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as e:
        raise ShapeError(
            f"concat: shapes {[p.shape for p in parts]} do not align on axis {axis}",
            shapes=[p.shape for p in parts],
        ) from e
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g: np.ndarray) -> list[np.ndarray]:
        return np.split(g, bounds, axis=axis)

    return record_op("concat", out, parts, backward)


def _expand_reduced(g: np.ndarray, shape: tuple[int, ...], axis: Axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else axis
        g = np.expand_dims(g, tuple(a % len(shape) for a in axes))
    return np.broadcast_to(g, shape)


def sum(x: Any, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = np.asarray(x.data.sum(axis=axis, keepdims=keepdims))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (_expand_reduced(g, x.shape, axis, keepdims),)

    return record_op("sum", out, (x,), backward)


def mean(x: Any, axis: Axis = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = np.asarray(x.data.mean(axis=axis, keepdims=keepdims))
    count = x.data.size // max(out.size, 1)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (_expand_reduced(g / count, x.shape, axis, keepdims),)

    return record_op("mean", out, (x,), backward)


def _is_basic_index(key: Any) -> bool:
    items = key if isinstance(key, tuple) else (key,)
    return all(
        isinstance(k, (slice, int, np.integer)) or k is None or k is Ellipsis for k in items
    )


def getitem(x: Any, key: Any) -> Tensor:
    """Indexing with slices, integers or integer arrays."""
    x = as_tensor(x)
    try:
        out = np.array(x.data[key], copy=True)
    except IndexError as e:
        raise ShapeError(f"getitem: index {key!r} invalid for shape {x.shape}") from e
    basic = _is_basic_index(key)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros(x.shape, dtype=x.data.dtype)
        if basic:
            full[key] = g
        else:
            np.add.at(full, key, g)
        return (full,)

    return record_op("getitem", out, (x,), backward)


def stop_gradient(x: Any) -> Tensor:
    """Identity in the forward pass; contributes no gradient to its input."""
    x = as_tensor(x)

    def backward(g: np.ndarray) -> tuple[None]:
        return (None,)

    return record_op("stop_gradient", x.data.copy(), (x,), backward, track=False)
