import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfdae.numeric import Rng, ShapeError, matmul, relu, sigmoid, softmax, tanh_act


def naive_matmul(a, b):
    # Independent triple-loop oracle.
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


class TestMatmul:
    def test_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(matmul(np.eye(2), m), m)

    def test_hand_arithmetic(self):
        out = matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))
        assert out.shape == (1, 1) and out[0, 0] == 11.0

    def test_against_triple_loop(self):
        rng = Rng(7)
        a = rng.normal((7, 5))
        b = rng.normal((5, 3))
        assert np.max(np.abs(matmul(a, b) - naive_matmul(a, b))) < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_random_sizes_up_to_32(self, seed):
        rng = Rng(seed)
        r, k, c = (int(v) for v in rng.integers(1, 33, 3))
        a, b = rng.normal((r, k)), rng.normal((k, c))
        assert np.max(np.abs(matmul(a, b) - naive_matmul(a, b))) < 1e-12

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.zeros((2, 3)), np.zeros((2, 2)))


class TestSigmoid:
    def test_symmetry_point(self):
        assert sigmoid(np.array([0.0]))[0] == 0.5

    def test_saturation_no_overflow(self):
        out = sigmoid(np.array([-1000.0, 1000.0]))
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(0.0, abs=1e-300)
        assert out[1] == pytest.approx(1.0, abs=1e-300)

    def test_high_precision_point(self):
        # Frozen from a 50-digit evaluation of 1/(1+e^-0.5).
        assert abs(sigmoid(np.array([0.5]))[0] - 0.62245933120185456464) < 1e-12

    @given(st.floats(min_value=-1e308, max_value=1e308, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_never_nan_in_unit_interval(self, x):
        y = sigmoid(np.array([x]))[0]
        assert np.isfinite(y) and 0.0 <= y <= 1.0


class TestTanh:
    def test_odd_at_zero(self):
        assert tanh_act(np.array([0.0]))[0] == 0.0

    def test_saturation(self):
        assert tanh_act(np.array([1000.0]))[0] == pytest.approx(1.0, abs=1e-12)

    def test_oddness(self):
        x = Rng(3).normal(100) * 5
        assert np.array_equal(tanh_act(x), -tanh_act(-x))


class TestSoftmax:
    def test_uniform(self):
        assert np.allclose(softmax(np.zeros(3)), 1.0 / 3.0, atol=1e-15)

    def test_shift_invariance(self):
        for c in (-50.0, 0.0, 123.25):
            out = softmax(np.array([c, c + np.log(2.0)]))
            assert abs(out[0] - 1.0 / 3.0) < 1e-12
            assert abs(out[1] - 2.0 / 3.0) < 1e-12

    def test_large_logits_stable(self):
        out = softmax(np.array([1e4, 0.0]))
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(1.0, abs=1e-12)
        assert out[1] == pytest.approx(0.0, abs=1e-12)

    @given(st.lists(st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
                    min_size=1, max_size=16))
    @settings(max_examples=200, deadline=None)
    def test_distribution_property(self, logits):
        out = softmax(np.array(logits))
        assert np.all(out > 0.0)
        assert abs(out.sum() - 1.0) < 1e-12


class TestRelu:
    def test_examples(self):
        assert np.array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])
        assert np.array_equal(relu(np.array([-3.0, -0.5])), [0.0, 0.0])

    def test_abs_identity(self):
        x = Rng(11).normal(64)
        assert np.array_equal(relu(x) + relu(-x), np.abs(x))


class TestRng:
    def test_same_seed_same_stream(self):
        a, b = Rng(42), Rng(42)
        assert np.array_equal(a.normal(100), b.normal(100))
        assert np.array_equal(a.integers(0, 1000, 50), b.integers(0, 1000, 50))

    def test_substream_reproducible_and_distinct(self):
        a = Rng(42).substream("dropout").random(64)
        b = Rng(42).substream("dropout").random(64)
        c = Rng(42).substream("masking").random(64)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_substreams_look_independent(self):
        x = Rng(5).substream("init").random(4096)
        y = Rng(5).substream("shuffling").random(4096)
        assert abs(np.corrcoef(x, y)[0, 1]) < 0.05

    def test_substream_consumption_is_isolated(self):
        root = Rng(9)
        d1 = root.substream("dropout")
        d1.random(1000)  # consuming one stream
        s1 = root.substream("shuffling").random(16)
        s2 = Rng(9).substream("shuffling").random(16)
        assert np.array_equal(s1, s2)
