import numpy as np
import pytest

from fitnets.errors import OpStateError, ShapeError
from fitnets.tensor.ops import (
    Conv2d,
    FullyConnected,
    GlobalMaxPool,
    Maxout,
    MaxPool2d,
    ReLU,
    Sigmoid,
    as_tensor,
    get_default_dtype,
    pool_output_extent,
    set_default_dtype,
    uniform_init,
)

from .utils import naive_conv2d


def test_conv2d_matches_naive_loops() -> None:
    """Test the vectorized convolution against six nested loops."""
    rng = np.random.default_rng(0)
    for _ in range(100):
        b, c, o = rng.integers(1, 4, size=3)
        pad = bool(rng.random() < 0.5)
        if pad:
            kh, kw = rng.choice([1, 3, 5], size=2)
        else:
            kh, kw = rng.integers(1, 4, size=2)
        h, w = rng.integers(max(kh, 1), 8), rng.integers(max(kw, 1), 8)
        x = rng.standard_normal((b, c, h, w))
        weights = rng.standard_normal((o, c, kh, kw))
        bias = rng.standard_normal(o)
        got = Conv2d(pad=pad).forward(x, weights, bias)
        want = naive_conv2d(x, weights, bias, pad)
        assert got.shape == want.shape
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_padded_conv_preserves_spatial_size() -> None:
    x = np.ones((2, 3, 7, 5))
    out = Conv2d(pad=True).forward(x, np.ones((4, 3, 3, 3)), np.zeros(4))
    assert out.shape == (2, 4, 7, 5)
    # Corner sees a 2x2 patch of ones per channel.
    assert out[0, 0, 0, 0] == 12.0
    assert out[0, 0, 3, 2] == 27.0


def test_conv2d_channel_mismatch_names_both_shapes() -> None:
    with pytest.raises(ShapeError) as excinfo:
        Conv2d().forward(np.zeros((1, 3, 4, 4)), np.zeros((2, 4, 3, 3)), np.zeros(2))
    message = str(excinfo.value)
    assert "(1, 3, 4, 4)" in message
    assert "(2, 4, 3, 3)" in message


def test_conv2d_rejects_even_kernel_with_padding() -> None:
    with pytest.raises(ShapeError):
        Conv2d(pad=True).forward(np.zeros((1, 1, 4, 4)), np.zeros((1, 1, 2, 2)), np.zeros(1))


@pytest.mark.parametrize(
    "op",
    [Conv2d(), MaxPool2d((2, 2)), GlobalMaxPool(), Maxout(2), FullyConnected(), ReLU(), Sigmoid()],
)
def test_backward_before_forward(op) -> None:
    with pytest.raises(OpStateError):
        op.backward(np.zeros((1, 1)))


def test_maxpool_values_and_first_maximum_gets_gradient() -> None:
    x = np.array([[[[1.0, 3.0, 2.0, 0.0], [3.0, 1.0, 5.0, 5.0]]]])
    pool = MaxPool2d((2, 2))
    out = pool.forward(x)
    np.testing.assert_array_equal(out, [[[[3.0, 5.0]]]])
    (grad,) = pool.backward(np.ones_like(out))
    # Tie between (0, 1) and (1, 0): the first in row-major order wins.
    expected = np.array([[[[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]]])
    np.testing.assert_array_equal(grad, expected)


def test_overlapping_pool_accumulates_gradient() -> None:
    x = np.zeros((1, 1, 1, 5))
    x[0, 0, 0, 2] = 1.0
    pool = MaxPool2d((1, 3), (0, 2))
    out = pool.forward(x)
    assert out.shape == (1, 1, 1, 3)
    np.testing.assert_array_equal(out[0, 0, 0], [1.0, 1.0, 1.0])
    (grad,) = pool.backward(np.ones_like(out))
    assert grad[0, 0, 0, 2] == 3.0
    assert grad.sum() == 3.0


@pytest.mark.parametrize(
    ("extent", "window", "overlap", "expected"),
    [(32, 2, 0, 16), (14, 4, 2, 6), (6, 4, 2, 2), (7, 2, 0, 3), (24, 4, 2, 11)],
)
def test_pool_output_extent(extent: int, window: int, overlap: int, expected: int) -> None:
    assert pool_output_extent(extent, window, overlap) == expected


def test_pool_overlap_must_be_smaller_than_window() -> None:
    with pytest.raises(ShapeError):
        MaxPool2d((2, 2), (2, 0))


def test_global_maxpool() -> None:
    x = np.arange(24, dtype=np.float64).reshape(1, 2, 3, 4)
    pool = GlobalMaxPool()
    out = pool.forward(x)
    np.testing.assert_array_equal(out.reshape(-1), [11.0, 23.0])
    (grad,) = pool.backward(np.array([2.0, 3.0]).reshape(1, 2, 1, 1))
    assert grad[0, 0, 2, 3] == 2.0
    assert grad[0, 1, 2, 3] == 3.0
    assert grad.sum() == 5.0


def test_maxout_groups_contiguous_channels() -> None:
    x = np.array([[1.0, 4.0, 3.0, 2.0, 5.0, 5.0]])
    maxout = Maxout(2)
    out = maxout.forward(x)
    np.testing.assert_array_equal(out, [[4.0, 3.0, 5.0]])
    (grad,) = maxout.backward(np.array([[1.0, 2.0, 3.0]]))
    np.testing.assert_array_equal(grad, [[0.0, 1.0, 2.0, 0.0, 3.0, 0.0]])


def test_maxout_on_feature_maps() -> None:
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 6, 3, 3))
    out = Maxout(3).forward(x)
    assert out.shape == (2, 2, 3, 3)
    np.testing.assert_array_equal(out[:, 0], x[:, 0:3].max(axis=1))
    np.testing.assert_array_equal(out[:, 1], x[:, 3:6].max(axis=1))


def test_maxout_rejects_indivisible_channels() -> None:
    with pytest.raises(ShapeError):
        Maxout(2).forward(np.zeros((1, 3)))


def test_relu_derivative_at_zero_is_zero() -> None:
    relu = ReLU()
    out = relu.forward(np.array([[-1.0, 0.0, 2.0]]))
    np.testing.assert_array_equal(out, [[0.0, 0.0, 2.0]])
    (grad,) = relu.backward(np.ones((1, 3)))
    np.testing.assert_array_equal(grad, [[0.0, 0.0, 1.0]])


def test_sigmoid() -> None:
    sigmoid = Sigmoid()
    out = sigmoid.forward(np.array([[0.0, 1000.0, -1000.0]]))
    np.testing.assert_array_equal(out, [[0.5, 1.0, 0.0]])
    (grad,) = sigmoid.backward(np.ones((1, 3)))
    assert grad[0, 0] == 0.25


def test_fully_connected_flattens_feature_maps() -> None:
    x = np.arange(8, dtype=np.float64).reshape(2, 1, 2, 2)
    weights = np.ones((3, 4))
    fc = FullyConnected()
    out = fc.forward(x, weights, np.array([0.0, 1.0, 2.0]))
    np.testing.assert_array_equal(out, [[6.0, 7.0, 8.0], [22.0, 23.0, 24.0]])
    grad_x, grad_w, grad_b = fc.backward(np.ones((2, 3)))
    assert grad_x.shape == x.shape
    np.testing.assert_array_equal(grad_b, [2.0, 2.0, 2.0])
    np.testing.assert_array_equal(grad_w[0], [4.0, 6.0, 8.0, 10.0])


def test_default_dtype_switch() -> None:
    assert get_default_dtype() == np.float64
    try:
        set_default_dtype("float32")
        assert as_tensor([1, 2]).dtype == np.float32
        assert uniform_init(np.random.default_rng(0), (2,), 0.1).dtype == np.float32
    finally:
        set_default_dtype("float64")
    with pytest.raises(ValueError):
        set_default_dtype("float16")


def test_uniform_init_range() -> None:
    values = uniform_init(np.random.default_rng(0), (1000,), 0.005)
    assert np.all(np.abs(values) < 0.005)
    assert values.std() > 0.002
