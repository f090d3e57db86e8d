import numpy as np
import pytest

from rfdae.layers import (ACT_NONE, ACT_RELU, DenseLayer, DropoutSpec, dropout_apply,
                          grad_check)
from rfdae.numeric import NumericError, Rng


class TestDenseForward:
    def test_identity_layer(self):
        layer = DenseLayer(np.eye(2), np.zeros(2), ACT_NONE)
        assert np.array_equal(layer.forward(np.array([1.0, -2.0])), [1.0, -2.0])

    def test_relu_clamp(self):
        layer = DenseLayer(np.array([[1.0, 1.0]]), np.array([-3.0]), ACT_RELU)
        assert np.array_equal(layer.forward(np.array([1.0, 1.0])), [0.0])

    def test_against_hand_oracle(self):
        rng = Rng(1)
        layer = DenseLayer.init(3, 4, ACT_NONE, rng)
        x = rng.normal(4)
        expect = np.array([sum(layer.weight[i, j] * x[j] for j in range(4)) + layer.bias[i]
                           for i in range(3)])
        assert np.max(np.abs(layer.forward(x) - expect)) < 1e-12

    def test_batched_matches_per_row(self):
        rng = Rng(2)
        layer = DenseLayer.init(3, 4, ACT_RELU, rng)
        xb = rng.normal((6, 4))
        yb = layer.forward(xb)
        for i in range(6):
            # gemm vs gemv reduction orders differ in the last ulp
            assert np.allclose(yb[i], layer.forward(xb[i]), rtol=1e-12, atol=1e-15)


class TestDenseBackward:
    def test_linear_grad_b_is_upstream(self):
        layer = DenseLayer(Rng(3).normal((3, 2)), np.zeros(3), ACT_NONE)
        layer.forward(np.array([0.5, -0.5]))
        e1 = np.array([1.0, 0.0, 0.0])
        _, grad_b, _ = layer.backward(e1)
        assert np.array_equal(grad_b, e1)

    def test_linear_grad_w_is_outer_product(self):
        rng = Rng(4)
        layer = DenseLayer(rng.normal((3, 2)), rng.normal(3), ACT_NONE)
        x = rng.normal(2)
        layer.forward(x)
        up = rng.normal(3)
        grad_w, _, _ = layer.backward(up)
        assert np.array_equal(grad_w, np.outer(up, x))

    def test_backward_before_forward_raises(self):
        layer = DenseLayer(np.eye(2), np.zeros(2))
        with pytest.raises(RuntimeError, match="before forward"):
            layer.backward(np.zeros(2))

    def test_finite_difference(self):
        # Central differences at h=1e-5 on a random 5 -> 4 layer.
        class Unit:
            def __init__(self):
                rng = Rng(5)
                self.layer = DenseLayer.init(4, 5, ACT_RELU, rng)
                self.x = rng.normal(5)
                self.t = rng.normal(4)

            def param_tensors(self):
                return {"w": self.layer.weight, "b": self.layer.bias}

            def loss_and_grads(self):
                y = self.layer.forward(self.x)
                gw, gb, _ = self.layer.backward(y - self.t)
                return 0.5 * float(np.sum((y - self.t) ** 2)), {"w": gw, "b": gb}

        rep = grad_check(Unit(), tolerance=1e-6)
        assert rep.passed, rep.max_relative_error

    def test_pure_over_parameters(self):
        rng = Rng(6)
        layer = DenseLayer.init(4, 3, ACT_RELU, rng)
        w0, b0 = layer.weight.copy(), layer.bias.copy()
        x = rng.normal(3)
        layer.forward(x)
        layer.backward(rng.normal(4))
        assert np.array_equal(layer.weight, w0)
        assert np.array_equal(layer.bias, b0)


class TestDropout:
    def test_rate_zero_is_identity(self):
        x = Rng(7).normal(100)
        y, mask = dropout_apply(DropoutSpec(0.0, "train"), x, Rng(8))
        assert np.array_equal(y, x)
        assert np.array_equal(mask, np.ones_like(x))

    def test_eval_mode_is_identity(self):
        x = Rng(9).normal(100)
        y, mask = dropout_apply(DropoutSpec(0.2, "eval"), x, Rng(10))
        assert np.array_equal(y, x)
        assert np.array_equal(mask, np.ones_like(x))

    def test_zero_fraction_and_expectation(self):
        x = np.ones(100_000)
        y, mask = dropout_apply(DropoutSpec(0.2, "train"), x, Rng(11).substream("dropout"))
        zero_frac = np.mean(y == 0.0)
        assert abs(zero_frac - 0.2) < 0.01
        assert abs(np.mean(y) - 1.0) < 0.01  # inverted scaling keeps E[y] = x
        surviving = y[y != 0.0]
        assert np.allclose(surviving, 1.0 / 0.8)

    def test_expectation_over_many_masks(self):
        # Mean over 10^4 masks stays within 1% of x at rate 0.2.
        x = np.array([1.0, -2.0, 0.5, 3.0])
        rng = Rng(12).substream("dropout")
        acc = np.zeros_like(x)
        for _ in range(10_000):
            y, _ = dropout_apply(DropoutSpec(0.2, "train"), x, rng)
            acc += y
        assert np.max(np.abs(acc / 10_000 - x) / np.abs(x)) < 0.01

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            DropoutSpec(1.0, "train")


class TestGradCheck:
    class _LinearUnit:
        def __init__(self, scale=1.0, seed=13):
            rng = Rng(seed)
            self.layer = DenseLayer.init(3, 4, ACT_NONE, rng)
            self.x = rng.normal(4)
            self.scale = scale

        def param_tensors(self):
            return {"w": self.layer.weight, "b": self.layer.bias}

        def loss_and_grads(self):
            y = self.layer.forward(self.x)
            gw, gb, _ = self.layer.backward(y)
            return 0.5 * float(np.sum(y * y)), {"w": gw * self.scale, "b": gb * self.scale}

    def test_linear_quadratic_is_tight(self):
        rep = grad_check(self._LinearUnit(), tolerance=1e-9)
        assert rep.passed, rep.max_relative_error

    def test_zero_gradient_point_passes_with_zero_error(self):
        class Constant:
            def __init__(self):
                self.theta = np.zeros(3)

            def param_tensors(self):
                return {"theta": self.theta}

            def loss_and_grads(self):
                return 1.0, {"theta": np.zeros(3)}

        rep = grad_check(Constant(), tolerance=1e-4)
        assert rep.passed and rep.max_relative_error == 0.0

    def test_corrupted_gradient_fails(self):
        rep = grad_check(self._LinearUnit(scale=1.01), tolerance=1e-4)
        assert not rep.passed

    def test_nonfinite_loss_names_parameter(self):
        class Bad:
            def __init__(self):
                self.theta = np.array([0.0])
                self.calls = 0

            def param_tensors(self):
                return {"theta": self.theta}

            def loss_and_grads(self):
                self.calls += 1
                if self.calls > 1:
                    return float("nan"), {"theta": np.array([0.0])}
                return 0.0, {"theta": np.array([0.0])}

        with pytest.raises(NumericError, match="theta"):
            grad_check(Bad(), tolerance=1e-4)
