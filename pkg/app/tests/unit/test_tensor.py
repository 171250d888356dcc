"""
Unit tests for the tensor core: forward values, backward order and gradient checks.
"""

import numpy as np
import pytest

from app.core.errors import GraphError, ShapeError
from app.tensor import ops
from app.tensor.tensor import (
    Graph,
    Tensor,
    as_tensor,
    backward,
    get_default_dtype,
    precision,
    set_default_dtype,
)
from app.tests.fixtures.gradcheck import CheckPrecision, gradient_check

INSTANCES = range(20)


def _param(rng: np.random.Generator, *shape: int, name: str = "x", offset: float = 0.0) -> Tensor:
    return Tensor.parameter(rng.standard_normal(shape) + offset, name=name)


def _away_from_zero(rng: np.random.Generator, *shape: int, name: str = "x") -> Tensor:
    """Values with |v| >= 0.2 so ReLU kinks are out of finite-difference reach."""
    data = rng.uniform(0.2, 1.5, size=shape) * rng.choice([-1.0, 1.0], size=shape)
    return Tensor.parameter(data, name=name)


def _weighted_sum(out: Tensor, seed: int) -> Tensor:
    w = np.random.default_rng(seed + 1000).standard_normal(out.shape)
    return ops.sum(ops.mul(out, w))


def _assert_grads(errors: dict[str, float], tolerance: float) -> None:
    for name, err in errors.items():
        assert err <= tolerance, f"{name}: relative error {err:.2e}"


@pytest.mark.unit
class TestTensorBasics:
    """Test tensor construction, precision and the graph context."""

    def test_default_precision_is_float32(self) -> None:
        """Test tensors default to 32-bit reals."""
        assert get_default_dtype() == np.float32
        assert Tensor([1.0, 2.0]).data.dtype == np.float32

    def test_precision_context_restores(self) -> None:
        """Test the precision context switches and restores the dtype."""
        with precision("float64"):
            assert Tensor([1.0]).data.dtype == np.float64
        assert get_default_dtype() == np.float32

    def test_unsupported_dtype_rejected(self) -> None:
        """Test only float32/float64 are accepted."""
        with pytest.raises(ShapeError):
            set_default_dtype("int32")

    def test_no_recording_outside_graph(self) -> None:
        """Test ops evaluate eagerly without a graph and never require grad."""
        p = Tensor.parameter([1.0, 2.0], name="p")
        out = ops.mul(p, 3.0)
        assert not out.requires_grad
        np.testing.assert_allclose(out.data, [3.0, 6.0])

    def test_graph_records_in_execution_order(self) -> None:
        """Test nodes are appended in execution order."""
        p = Tensor.parameter([1.0, -2.0], name="p")
        with Graph() as graph:
            a = ops.relu(p)
            b = ops.sum(a)
        assert [node.op for node in graph.nodes] == ["relu", "sum"]
        assert graph.nodes[-1].output is b

    def test_item_requires_single_element(self) -> None:
        """Test item() on a vector is an error."""
        with pytest.raises(ShapeError):
            Tensor([1.0, 2.0]).item()


@pytest.mark.unit
class TestBackward:
    """Test reverse-mode accumulation."""

    def test_shared_subexpression_accumulates(self, float64: None) -> None:
        """Test a tensor used twice receives the sum of both contributions."""
        x = Tensor.parameter([3.0], name="x")
        with Graph() as graph:
            y = ops.mul(x, x)
            loss = ops.sum(ops.add(y, x))
        graph.backward(loss)
        np.testing.assert_allclose(x.grad, [7.0])

    def test_gradients_accumulate_across_calls(self, float64: None) -> None:
        """Test repeated backward passes add into grad."""
        x = Tensor.parameter([1.0, 2.0], name="x")
        for _ in range(2):
            with Graph() as graph:
                loss = ops.sum(ops.scale(x, 2.0))
            graph.backward(loss)
        np.testing.assert_allclose(x.grad, [4.0, 4.0])

    def test_module_backward_uses_loss_graph(self, float64: None) -> None:
        """Test the free backward() finds the graph that produced the loss."""
        x = Tensor.parameter([2.0], name="x")
        with Graph():
            loss = ops.sum(ops.square(x))
        backward(loss)
        np.testing.assert_allclose(x.grad, [4.0])

    def test_non_scalar_loss_rejected(self) -> None:
        """Test backward needs a scalar."""
        x = Tensor.parameter([1.0, 2.0], name="x")
        with Graph() as graph:
            y = ops.scale(x, 2.0)
        with pytest.raises(GraphError):
            graph.backward(y)

    def test_detached_loss_rejected(self) -> None:
        """Test a loss computed without a graph cannot be backpropagated."""
        x = Tensor.parameter([1.0], name="x")
        loss = ops.sum(x)
        with pytest.raises(GraphError):
            backward(loss)

    def test_stop_gradient_blocks(self, float64: None) -> None:
        """Test stop_gradient passes values but no gradient."""
        x = Tensor.parameter([1.5, -0.5], name="x")
        y = Tensor.parameter([2.0, 2.0], name="y")
        with Graph() as graph:
            loss = ops.sum(ops.mul(ops.stop_gradient(x), y))
        graph.backward(loss)
        assert x.grad is None
        np.testing.assert_allclose(y.grad, [1.5, -0.5])


@pytest.mark.unit
class TestForwardOps:
    """Test forward values and shape errors."""

    def test_broadcast_mismatch_names_shapes(self) -> None:
        """Test incompatible shapes raise with both shapes in the message."""
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4,\)"):
            ops.add(np.zeros((2, 3)), np.zeros(4))

    def test_matmul_misaligned(self) -> None:
        """Test matmul shape check."""
        with pytest.raises(ShapeError):
            ops.matmul(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_sigmoid_midpoint(self) -> None:
        """Test sigmoid(0) is exactly one half."""
        assert ops.sigmoid(np.zeros(3)).data.tolist() == [0.5, 0.5, 0.5]

    def test_softmax_rows_sum_to_one(self) -> None:
        """Test softmax normalizes the last axis, even for large logits."""
        out = ops.softmax(np.array([[1000.0, 1001.0, 999.0], [0.0, 0.0, 0.0]]))
        np.testing.assert_allclose(out.data.sum(axis=-1), [1.0, 1.0], rtol=1e-6)
        assert np.all(np.isfinite(out.data))

    def test_conv2d_matches_direct_loop(self, float64: None, rng: np.random.Generator) -> None:
        """Test conv2d against an explicit cross-correlation loop."""
        x = rng.standard_normal((2, 3, 6, 6))
        w = Tensor(rng.standard_normal((4, 3, 3, 3)))
        b = Tensor(rng.standard_normal(4))
        out = ops.conv2d(x, w, b, stride=2, padding=1).data

        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        expected = np.zeros((2, 4, 3, 3))
        for n in range(2):
            for o in range(4):
                for i in range(3):
                    for j in range(3):
                        patch = xp[n, :, 2 * i : 2 * i + 3, 2 * j : 2 * j + 3]
                        expected[n, o, i, j] = np.sum(patch * w.data[o]) + b.data[o]
        np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-12)

    def test_conv2d_single_image(self, rng: np.random.Generator) -> None:
        """Test 3-D input gives 3-D output."""
        out = ops.conv2d(rng.standard_normal((3, 8, 8)), Tensor(np.ones((5, 3, 3, 3))), padding=1)
        assert out.shape == (5, 8, 8)

    def test_conv2d_channel_mismatch(self) -> None:
        """Test mismatched input channels are a shape error."""
        with pytest.raises(ShapeError):
            ops.conv2d(np.zeros((1, 2, 4, 4)), Tensor(np.zeros((1, 3, 3, 3))))

    def test_upsample_nearest(self) -> None:
        """Test 2x nearest-neighbor upsampling."""
        out = ops.upsample2x(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        assert out.shape == (1, 4, 4)
        assert out.data[0, :2, :2].tolist() == [[1.0, 1.0], [1.0, 1.0]]
        assert out.data[0, 3, 3] == 4.0

    def test_maximum_minimum(self) -> None:
        """Test elementwise max/min."""
        a, b = np.array([1.0, 5.0]), np.array([3.0, 2.0])
        assert ops.maximum(a, b).data.tolist() == [3.0, 5.0]
        assert ops.minimum(a, b).data.tolist() == [1.0, 2.0]

    def test_reshape_invalid(self) -> None:
        """Test an impossible reshape is a shape error."""
        with pytest.raises(ShapeError):
            ops.reshape(np.zeros(6), (4, 2))

    def test_concat_mismatch(self) -> None:
        """Test concat rejects non-aligned shapes."""
        with pytest.raises(ShapeError):
            ops.concat([np.zeros((2, 3)), np.zeros((2, 4))], axis=0)

    def test_log_softmax_matches_log_of_softmax(self, rng: np.random.Generator) -> None:
        """Test log_softmax agrees with log(softmax)."""
        x = rng.standard_normal((4, 5))
        np.testing.assert_allclose(
            ops.log_softmax(x).data, np.log(ops.softmax(x).data), rtol=1e-5, atol=1e-6
        )

    def test_as_tensor_passthrough(self) -> None:
        """Test as_tensor returns tensors unchanged."""
        t = Tensor([1.0])
        assert as_tensor(t) is t


@pytest.mark.unit
class TestGradients:
    """Finite-difference checks of every differentiable op on 20 random instances per precision."""

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_elementwise_arithmetic(self, check_precision: CheckPrecision, seed: int) -> None:
        """Test add/sub/mul with broadcasting, scale and add_scalar."""
        rng = np.random.default_rng(seed)
        a, b = _param(rng, 3, 4, name="a"), _param(rng, 4, name="b")

        def loss() -> Tensor:
            out = ops.mul(ops.add(a, b), ops.sub(a, b))
            return _weighted_sum(ops.add_scalar(ops.scale(out, 0.7), 1.0), seed)

        _assert_grads(
            gradient_check(loss, {"a": a, "b": b}, seed=seed, eps=check_precision.eps),
            check_precision.tolerance,
        )

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_square_relu_sigmoid(self, check_precision: CheckPrecision, seed: int) -> None:
        """Test pointwise nonlinearities."""
        rng = np.random.default_rng(seed)
        x = _away_from_zero(rng, 2, 5)

        def loss() -> Tensor:
            return _weighted_sum(ops.add(ops.square(ops.relu(x)), ops.sigmoid(x)), seed)

        _assert_grads(
            gradient_check(loss, {"x": x}, seed=seed, eps=check_precision.eps),
            check_precision.tolerance,
        )

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_maximum_minimum(self, check_precision: CheckPrecision, seed: int) -> None:
        """Test max/min routing with well-separated inputs."""
        rng = np.random.default_rng(seed)
        a = _param(rng, 6, name="a")
        b = Tensor.parameter(a.data + rng.choice([-0.5, 0.5], size=6), name="b")

        def loss() -> Tensor:
            return _weighted_sum(ops.add(ops.maximum(a, b), ops.scale(ops.minimum(a, b), 2.0)), seed)

        _assert_grads(
            gradient_check(loss, {"a": a, "b": b}, seed=seed, eps=check_precision.eps),
            check_precision.tolerance,
        )

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_softmax_and_log_softmax(self, check_precision: CheckPrecision, seed: int) -> None:
        """Test both normalizations over the last axis."""
        rng = np.random.default_rng(seed)
        x = _param(rng, 3, 5)

        def loss() -> Tensor:
            return ops.add(
                _weighted_sum(ops.softmax(x), seed), _weighted_sum(ops.log_softmax(x), seed + 1)
            )

        _assert_grads(
            gradient_check(loss, {"x": x}, seed=seed, eps=check_precision.eps),
            check_precision.tolerance,
        )

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_matmul_transpose(self, check_precision: CheckPrecision, seed: int) -> None:
        """Test matrix product and transpose."""
        rng = np.random.default_rng(seed)
        a, b = _param(rng, 3, 4, name="a"), _param(rng, 5, 4, name="b")

        def loss() -> Tensor:
            return _weighted_sum(ops.matmul(a, ops.transpose(b)), seed)

        _assert_grads(
            gradient_check(loss, {"a": a, "b": b}, seed=seed, eps=check_precision.eps),
            check_precision.tolerance,
        )

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_conv2d(self, check_precision: CheckPrecision, seed: int) -> None:
        """Test convolution gradients for input, kernel and bias with stride and padding."""
        rng = np.random.default_rng(seed)
        stride, padding = (1, 0) if seed % 2 else (2, 1)
        x = _param(rng, 2, 2, 5, 5, name="x")
        w = _param(rng, 3, 2, 3, 3, name="w")
        b = _param(rng, 3, name="b")

        def loss() -> Tensor:
            return _weighted_sum(ops.conv2d(x, w, b, stride=stride, padding=padding), seed)

        _assert_grads(
            gradient_check(loss, {"x": x, "w": w, "b": b}, seed=seed, eps=check_precision.eps),
            check_precision.tolerance,
        )

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_upsample_reshape_concat(self, check_precision: CheckPrecision, seed: int) -> None:
        """Test shape ops."""
        rng = np.random.default_rng(seed)
        x, y = _param(rng, 2, 3, 3, name="x"), _param(rng, 2, 3, 3, name="y")

        def loss() -> Tensor:
            up = ops.upsample2x(ops.concat([x, y], axis=0))
            return _weighted_sum(ops.reshape(up, (4, 36)), seed)

        _assert_grads(
            gradient_check(loss, {"x": x, "y": y}, seed=seed, eps=check_precision.eps),
            check_precision.tolerance,
        )

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_reductions(self, check_precision: CheckPrecision, seed: int) -> None:
        """Test sum/mean over axes, with and without keepdims."""
        rng = np.random.default_rng(seed)
        x = _param(rng, 3, 4, 2)

        def loss() -> Tensor:
            a = ops.mean(x, axis=(0, 2), keepdims=True)
            b = ops.sum(x, axis=1)
            return ops.add(_weighted_sum(a, seed), _weighted_sum(b, seed + 1))

        _assert_grads(
            gradient_check(loss, {"x": x}, seed=seed, eps=check_precision.eps),
            check_precision.tolerance,
        )

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_getitem(self, check_precision: CheckPrecision, seed: int) -> None:
        """Test slicing and integer-array indexing with repeated indices."""
        rng = np.random.default_rng(seed)
        x = _param(rng, 4, 5)
        rows = np.array([0, 2, 2, 3])
        cols = np.array([1, 1, 4, 0])

        def loss() -> Tensor:
            return ops.add(_weighted_sum(x[1:, ::2], seed), _weighted_sum(x[rows, cols], seed + 1))

        _assert_grads(
            gradient_check(loss, {"x": x}, seed=seed, eps=check_precision.eps),
            check_precision.tolerance,
        )
