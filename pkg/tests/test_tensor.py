import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ninconv.tensor import (
    ConvParams,
    TensorError,
    bilinear_resize,
    channel_concat,
    conv2d_backward,
    conv2d_forward,
    maxpool2d,
    maxpool2d_backward,
    relu_backward,
    relu_forward,
)
from oracles import bilinear_pixel, central_difference, conv2d_loops, max_rel_error, sliding_max


def test_conv_1x1_identity():
    x = np.random.default_rng(0).standard_normal((2, 1, 5, 6))
    p = ConvParams(np.ones((1, 1, 1, 1)), np.zeros(1))
    np.testing.assert_array_equal(conv2d_forward(x, p), x)


def test_conv_all_ones_3x3():
    p = ConvParams(np.ones((1, 1, 3, 3)), np.zeros(1))
    out = conv2d_forward(np.ones((1, 1, 3, 3)), p)[0, 0]
    np.testing.assert_array_equal(out, [[4, 6, 4], [6, 9, 6], [4, 6, 4]])


def test_conv_matches_nested_loops():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((1, 4, 8, 8))
    k = rng.standard_normal((6, 4, 5, 5))
    b = rng.standard_normal(6)
    got = conv2d_forward(x, ConvParams(k, b))
    assert np.max(np.abs(got - conv2d_loops(x, k, b))) < 1e-12


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(1, 3),
    c=st.integers(1, 4),
    o=st.integers(1, 4),
    h=st.integers(1, 9),
    w=st.integers(1, 9),
    k=st.sampled_from([1, 3, 5, 7]),
    seed=st.integers(0, 2**16),
)
def test_conv_oracle_property(n, c, o, h, w, k, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, c, h, w))
    kern = rng.standard_normal((o, c, k, k))
    b = rng.standard_normal(o)
    out = conv2d_forward(x, ConvParams(kern, b))
    assert out.shape == (n, o, h, w)
    assert np.max(np.abs(out - conv2d_loops(x, kern, b))) < 1e-12


def test_conv_linearity():
    rng = np.random.default_rng(2)
    p = ConvParams(rng.standard_normal((3, 2, 3, 3)), np.zeros(3))
    x, y = rng.standard_normal((2, 1, 2, 7, 6))
    lhs = conv2d_forward(2.5 * x - 1.5 * y, p)
    rhs = 2.5 * conv2d_forward(x, p) - 1.5 * conv2d_forward(y, p)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_conv_errors():
    with pytest.raises(TensorError):
        conv2d_forward(np.ones((1, 2, 4, 4)), ConvParams(np.ones((1, 3, 3, 3)), np.zeros(1)))
    with pytest.raises(TensorError):
        ConvParams(np.ones((1, 1, 2, 2)), np.zeros(1))


def test_conv_backward_zero_and_identity():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((2, 3, 5, 5))
    p = ConvParams(rng.standard_normal((4, 3, 3, 3)), rng.standard_normal(4))
    gi, gk, gb = conv2d_backward(x, p, np.zeros((2, 4, 5, 5)))
    assert not gi.any() and not gk.any() and not gb.any()

    ident = ConvParams(np.ones((1, 1, 1, 1)), np.zeros(1))
    g = rng.standard_normal((2, 1, 5, 5))
    gi, _, _ = conv2d_backward(x[:, :1], ident, g)
    np.testing.assert_array_equal(gi, g)


@pytest.mark.parametrize("k", [1, 3, 5])
def test_conv_backward_finite_differences(k):
    rng = np.random.default_rng(k)
    x = rng.standard_normal((2, 3, 5, 6))
    kern = rng.standard_normal((2, 3, k, k))
    bias = rng.standard_normal(2)
    weights = rng.standard_normal((2, 2, 5, 6))

    def loss():
        return float(np.sum(weights * conv2d_forward(x, ConvParams(kern, bias))))

    gi, gk, gb = conv2d_backward(x, ConvParams(kern, bias), weights)
    assert max_rel_error(gi, central_difference(loss, x)) < 1e-6
    assert max_rel_error(gk, central_difference(loss, kern)) < 1e-6
    assert max_rel_error(gb, central_difference(loss, bias)) < 1e-6


def test_conv_backward_shape_error():
    p = ConvParams(np.ones((2, 1, 3, 3)), np.zeros(2))
    with pytest.raises(TensorError):
        conv2d_backward(np.ones((1, 1, 4, 4)), p, np.ones((1, 1, 4, 4)))


def test_relu():
    x = np.array([-1.0, 0.0, 2.0]).reshape(1, 1, 1, 3)
    np.testing.assert_array_equal(relu_forward(x).ravel(), [0, 0, 2])
    pos = np.abs(np.random.default_rng(0).standard_normal((1, 2, 3, 3)))
    np.testing.assert_array_equal(relu_forward(pos), pos)
    at_zero = relu_backward(np.zeros((1, 1, 1, 1)), np.full((1, 1, 1, 1), 5.0))
    assert at_zero.item() == 0.0
    with pytest.raises(TensorError):
        relu_backward(np.zeros((1, 1, 1, 2)), np.zeros((1, 1, 1, 3)))


def test_maxpool_examples():
    const = np.full((1, 2, 6, 6), 3.0)
    np.testing.assert_array_equal(maxpool2d(const, 3, 1, True), const)
    x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
    assert maxpool2d(x, 2, 2, False).item() == 4.0


def test_maxpool_matches_sliding_oracle():
    x = np.random.default_rng(4).standard_normal((2, 3, 6, 6))
    np.testing.assert_array_equal(maxpool2d(x, 3, 1, True), sliding_max(x, 3, 1, 1, 1))
    np.testing.assert_array_equal(maxpool2d(x, 2, 2, False), sliding_max(x, 2, 2, 0, 0))


def test_maxpool_preserves_size_and_errors():
    x = np.random.default_rng(5).standard_normal((1, 1, 7, 5))
    assert maxpool2d(x, 3, 1, True).shape == x.shape
    assert maxpool2d(x, 2, 2, True).shape == (1, 1, 4, 3)
    with pytest.raises(TensorError):
        maxpool2d(np.ones((1, 1, 1, 1)), 2, 2, False)
    with pytest.raises(TensorError):
        maxpool2d(x, 4, 1, True)


@pytest.mark.parametrize("window,stride,same", [(3, 1, True), (2, 2, False), (2, 2, True), (3, 2, True)])
def test_maxpool_backward_finite_differences(window, stride, same):
    rng = np.random.default_rng(6)
    x = rng.standard_normal((1, 2, 5, 5))
    out_shape = maxpool2d(x, window, stride, same).shape
    wts = rng.standard_normal(out_shape)
    num = central_difference(lambda: float(np.sum(wts * maxpool2d(x, window, stride, same))), x)
    assert max_rel_error(maxpool2d_backward(x, wts, window, stride, same), num) < 1e-6


def test_maxpool_backward_tie_goes_to_first():
    x = np.ones((1, 1, 2, 2))
    g = maxpool2d_backward(x, np.ones((1, 1, 1, 1)), 2, 2, False)
    np.testing.assert_array_equal(g[0, 0], [[1, 0], [0, 0]])


def test_channel_concat():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((2, 3, 4, 4))
    np.testing.assert_array_equal(channel_concat([a]), a)
    parts = [rng.standard_normal((1, c, 5, 5)) for c in (8, 32, 16, 8)]
    cat = channel_concat(parts)
    assert cat.shape == (1, 64, 5, 5)
    start = 0
    for p in parts:
        np.testing.assert_array_equal(cat[:, start : start + p.shape[1]], p)
        start += p.shape[1]
    with pytest.raises(TensorError):
        channel_concat([])
    with pytest.raises(TensorError):
        channel_concat([a, rng.standard_normal((2, 1, 4, 5))])


def test_bilinear_identity_and_constant():
    x = np.random.default_rng(8).standard_normal((1, 2, 5, 7))
    np.testing.assert_array_equal(bilinear_resize(x, 5, 7), x)
    c = np.full((1, 1, 4, 6), 0.37)
    for size in [(1, 1), (3, 9), (13, 5)]:
        assert np.max(np.abs(bilinear_resize(c, *size) - 0.37)) < 1e-12


def test_bilinear_upscale_matches_formula():
    img = np.array([[0.0, 2.0], [2.0, 4.0]])
    out = bilinear_resize(img[None, None], 3, 3)[0, 0]
    expected = np.array([[bilinear_pixel(img, 3, 3, y, x) for x in range(3)] for y in range(3)])
    np.testing.assert_allclose(out, expected, rtol=0, atol=1e-15)
    # values frozen from the direct evaluation: scale 2/3, src = (d + .5) * 2/3 - .5
    np.testing.assert_allclose(out[1, 1], 2.0, atol=1e-15)
    np.testing.assert_allclose(out[0, 0], 0.0, atol=1e-15)
    np.testing.assert_allclose(out[0, 1], 1.0, atol=1e-15)


def test_bilinear_random_downscale_matches_formula():
    img = np.random.default_rng(9).standard_normal((7, 11))
    out = bilinear_resize(img[None, None], 4, 5)[0, 0]
    expected = np.array([[bilinear_pixel(img, 4, 5, y, x) for x in range(5)] for y in range(4)])
    np.testing.assert_allclose(out, expected, rtol=0, atol=1e-12)
