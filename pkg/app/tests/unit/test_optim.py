"""
Unit tests for the Adam optimizer.
"""

import numpy as np
import pytest

from app.core.errors import ConfigurationError, DivergedTrainingError
from app.tensor.optim import AdamState, adam_step
from app.tensor.tensor import Tensor


@pytest.mark.unit
class TestAdamStep:
    """Test the bias-corrected update."""

    def test_first_step_moves_by_lr(self, float64: None) -> None:
        """Test the first update is lr * sign(g) (up to eps)."""
        p = Tensor.parameter([1.0, -2.0, 0.5], name="p")
        grads = {"p": np.array([0.3, -4.0, 2.0])}
        adam_step({"p": p}, grads, AdamState(), lr=0.1)
        np.testing.assert_allclose(p.data, [0.9, -1.9, 0.4], rtol=1e-6)

    def test_matches_reference_formula(self, float64: None, rng: np.random.Generator) -> None:
        """Test three steps against a direct transcription of Adam."""
        init = rng.standard_normal(4)
        p = Tensor.parameter(init, name="p")
        state = AdamState()
        lr, b1, b2, eps = 0.01, 0.5, 0.999, 1e-8

        expected = init.copy()
        m = np.zeros(4)
        v = np.zeros(4)
        for t in range(1, 4):
            g = rng.standard_normal(4)
            adam_step({"p": p}, {"p": g}, state, lr, b1, b2, eps)
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            expected -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)

        np.testing.assert_allclose(p.data, expected, rtol=1e-10)
        assert state.step == 3

    def test_missing_gradient_counts_as_zero(self, float64: None) -> None:
        """Test a parameter without gradient keeps decaying moments."""
        p = Tensor.parameter([1.0], name="p")
        state = AdamState(step=1, m={"p": np.array([0.2])}, v={"p": np.array([0.04])})
        adam_step({"p": p}, {"p": None}, state, lr=0.1, beta1=0.5)
        np.testing.assert_allclose(state.m["p"], [0.1])
        assert p.data[0] < 1.0

    def test_bumps_versions(self) -> None:
        """Test every updated parameter gets a new version."""
        p = Tensor.parameter([1.0], name="p")
        adam_step({"p": p}, {"p": np.array([1.0])}, AdamState(), lr=0.1)
        assert p.version == 1

    def test_non_finite_gradient_aborts_before_update(self) -> None:
        """Test NaN gradients raise and leave parameters and state untouched."""
        p = Tensor.parameter([1.0, 2.0], name="p")
        q = Tensor.parameter([3.0], name="q")
        state = AdamState()
        with pytest.raises(DivergedTrainingError) as exc_info:
            adam_step(
                {"p": p, "q": q},
                {"p": np.array([0.1, 0.1]), "q": np.array([np.nan])},
                state,
                lr=0.1,
            )
        assert exc_info.value.context["parameter"] == "q"
        assert p.data.tolist() == [1.0, 2.0]
        assert state.step == 0

    def test_state_shape_mismatch(self) -> None:
        """Test stale optimizer state is rejected."""
        p = Tensor.parameter([1.0, 2.0], name="p")
        state = AdamState(m={"p": np.zeros(3)}, v={"p": np.zeros(3)})
        with pytest.raises(ConfigurationError):
            adam_step({"p": p}, {"p": np.zeros(2)}, state, lr=0.1)
