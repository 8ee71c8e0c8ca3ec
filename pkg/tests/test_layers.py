import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plugnorm.constants import EPS
from plugnorm.core import Tensor, backward, grad_check
from plugnorm.errors import ShapeError
from plugnorm.nn import functional as F
from plugnorm.nn.module import Conv2d


def naive_conv(x, weight, bias, stride=1, padding=0, groups=1):
    n, c, h, w = x.shape
    out_c, group_c, k, _ = weight.shape
    padded = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out_h = (h + 2 * padding - k) // stride + 1
    out_w = (w + 2 * padding - k) // stride + 1
    per_group = out_c // groups
    out = np.zeros((n, out_c, out_h, out_w))
    for b in range(n):
        for o in range(out_c):
            g = o // per_group
            for i in range(out_h):
                for j in range(out_w):
                    window = padded[b, g * group_c : (g + 1) * group_c, i * stride : i * stride + k, j * stride : j * stride + k]
                    out[b, o, i, j] = np.sum(window * weight[o]) + (bias[o] if bias is not None else 0.0)
    return out


def test_conv_scalar_multiply():
    out = F.conv2d(Tensor(np.full((1, 1, 1, 1), 3.0)), Tensor(np.full((1, 1, 1, 1), 2.0)), Tensor([0.0]))
    np.testing.assert_array_equal(out.data, [[[[6.0]]]])


def test_conv_identity_kernel(rng):
    x = rng.standard_normal((1, 1, 3, 3))
    kernel = np.zeros((1, 1, 3, 3))
    kernel[0, 0, 1, 1] = 1.0
    out = F.conv2d(Tensor(x), Tensor(kernel), padding=1)
    np.testing.assert_array_equal(out.data, x)


def test_conv_matches_naive_loops(rng):
    x = rng.standard_normal((1, 2, 5, 5))
    weight = rng.standard_normal((3, 2, 3, 3))
    bias = rng.standard_normal(3)
    out = F.conv2d(Tensor(x), Tensor(weight), Tensor(bias))
    np.testing.assert_allclose(out.data, naive_conv(x, weight, bias), rtol=1e-12, atol=1e-12)


@given(
    st.integers(1, 2),
    st.integers(1, 3),
    st.sampled_from([1, 3]),
    st.integers(0, 1),
    st.integers(1, 2),
    st.integers(0, 2**16),
)
def test_conv_geometry_matches_naive_loops(n, channels, k, padding, stride, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, channels, 6, 5))
    weight = rng.standard_normal((2, channels, k, k))
    bias = rng.standard_normal(2)
    out = F.conv2d(Tensor(x), Tensor(weight), Tensor(bias), stride=stride, padding=padding)
    expected = naive_conv(x, weight, bias, stride, padding)
    assert out.shape == expected.shape
    np.testing.assert_allclose(out.data, expected, rtol=1e-12, atol=1e-12)


def test_grouped_conv_matches_naive_loops(rng):
    x = rng.standard_normal((2, 4, 5, 5))
    weight = rng.standard_normal((4, 2, 3, 3))
    out = F.conv2d(Tensor(x), Tensor(weight), padding=1, groups=2)
    np.testing.assert_allclose(out.data, naive_conv(x, weight, None, 1, 1, 2), rtol=1e-12, atol=1e-12)


def test_conv_rejects_mismatched_shapes(rng):
    with pytest.raises(ShapeError):
        F.conv2d(Tensor(rng.standard_normal((1, 3, 4, 4))), Tensor(rng.standard_normal((2, 2, 3, 3))))
    with pytest.raises(ShapeError):
        F.conv2d(Tensor(rng.standard_normal((1, 1, 2, 2))), Tensor(rng.standard_normal((1, 1, 3, 3))))


@pytest.mark.parametrize("seed", range(20))
def test_conv_gradients(seed):
    rng = np.random.default_rng(seed)
    stride, padding = int(rng.integers(1, 3)), int(rng.integers(0, 2))
    weight = Tensor(rng.standard_normal((2, 2, 3, 3)))
    bias = Tensor(rng.standard_normal(2))
    x = rng.standard_normal((1, 2, 5, 4))
    assert grad_check(lambda t: F.conv2d(t, weight, bias, stride, padding), x) <= 1e-4

    x_const = Tensor(x)
    assert grad_check(lambda w: F.conv2d(x_const, w, bias, stride, padding), weight.data) <= 1e-4
    assert grad_check(lambda b: F.conv2d(x_const, weight, b, stride, padding), bias.data) <= 1e-4


def test_three_layer_composition_gradient(rng):
    conv1 = Conv2d(2, 3, 3, rng, padding=1, dtype=np.float64)
    conv2 = Conv2d(3, 2, 3, rng, padding=1, dtype=np.float64)

    def net(t):
        return conv2(F.instance_norm(F.relu(conv1(t))))

    assert grad_check(net, rng.standard_normal((2, 2, 6, 6))) <= 1e-4


def test_instance_norm_constant_channel_is_zero():
    out = F.instance_norm(Tensor(np.full((1, 1, 3, 3), 7.0)))
    np.testing.assert_array_equal(out.data, np.zeros((1, 1, 3, 3)))


def test_instance_norm_two_values():
    out = F.instance_norm(Tensor(np.array([1.0, 3.0]).reshape(1, 1, 1, 2)))
    np.testing.assert_allclose(out.data.ravel(), [-1.0, 1.0], atol=1e-5)


@given(st.integers(0, 2**16))
def test_instance_norm_output_statistics(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(3.0, 2.5, size=(2, 4, 8, 8))
    out = F.instance_norm(Tensor(x)).data
    assert np.abs(out.mean(axis=(2, 3))).max() <= 1e-5
    np.testing.assert_allclose(out.std(axis=(2, 3)), 1.0, atol=1e-4)


@pytest.mark.parametrize("seed", range(20))
def test_instance_norm_gradients(seed):
    rng = np.random.default_rng(seed)
    shape = (int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(2, 5)), int(rng.integers(2, 5)))
    assert grad_check(F.instance_norm, rng.standard_normal(shape)) <= 1e-4


def test_adaptive_pool_global_mean(rng):
    x = rng.standard_normal((2, 3, 5, 7))
    out = F.adaptive_avg_pool(Tensor(x), 1, 1)
    np.testing.assert_allclose(out.data[..., 0, 0], x.mean(axis=(2, 3)), rtol=1e-12)


def test_adaptive_pool_block_means():
    x = np.arange(1.0, 17.0).reshape(1, 1, 4, 4)
    out = F.adaptive_avg_pool(Tensor(x), 2, 2)
    np.testing.assert_array_equal(out.data[0, 0], [[3.5, 5.5], [11.5, 13.5]])


def test_adaptive_pool_bins_follow_floor_partition(rng):
    x = rng.standard_normal((1, 2, 5, 7))
    out = F.adaptive_avg_pool(Tensor(x), 2, 3)
    rows = [(0, 2), (2, 5)]
    cols = [(0, 2), (2, 4), (4, 7)]
    for i, (r0, r1) in enumerate(rows):
        for j, (c0, c1) in enumerate(cols):
            np.testing.assert_allclose(out.data[:, :, i, j], x[:, :, r0:r1, c0:c1].mean(axis=(2, 3)), rtol=1e-12)


def test_adaptive_pool_full_size_is_identity(rng):
    x = rng.standard_normal((1, 2, 4, 3))
    np.testing.assert_array_equal(F.adaptive_avg_pool(Tensor(x), 4, 3).data, x)


def test_adaptive_pool_rejects_invalid_sizes(rng):
    with pytest.raises(ShapeError):
        F.adaptive_avg_pool(Tensor(rng.standard_normal((1, 1, 2, 2))), 3, 1)
    with pytest.raises(ShapeError):
        F.adaptive_avg_pool(Tensor(rng.standard_normal((1, 1, 2, 2))), 0, 1)


def test_adaptive_pool_gradient(rng):
    assert grad_check(lambda t: F.adaptive_avg_pool(t, 2, 3), rng.standard_normal((1, 2, 5, 7))) <= 1e-4


def test_channel_stats_zero_input():
    stats = F.channel_stats(Tensor(np.zeros((2, 3, 2, 2))))
    np.testing.assert_array_equal(stats.mu.data, np.zeros(3))
    np.testing.assert_allclose(stats.sigma.data, np.sqrt(EPS))


def test_channel_stats_pool_over_batch():
    x = np.array([0.0, 2.0]).reshape(2, 1, 1, 1)
    stats = F.channel_stats(Tensor(x))
    assert stats.mu.item() == 1.0
    assert stats.sigma.item() == pytest.approx(np.sqrt(1.0 + EPS), abs=1e-12)


def test_channel_stats_two_pass_oracle(rng):
    x = rng.normal(1.0, 3.0, size=(3, 4, 5, 6))
    stats = F.channel_stats(Tensor(x))
    mu = x.sum(axis=(0, 2, 3)) / (3 * 5 * 6)
    var = ((x - mu[None, :, None, None]) ** 2).sum(axis=(0, 2, 3)) / (3 * 5 * 6)
    np.testing.assert_allclose(stats.mu.data, mu, atol=1e-10)
    np.testing.assert_allclose(stats.sigma.data, np.sqrt(var + EPS), atol=1e-10)


def test_instance_stats_are_per_sample(rng):
    x = rng.standard_normal((3, 2, 4, 4))
    stats = F.instance_stats(Tensor(x))
    assert stats.mu.shape == (3, 2)
    np.testing.assert_allclose(stats.mu.data, x.mean(axis=(2, 3)), atol=1e-12)


def test_relu_pool_upsample_definitions():
    np.testing.assert_array_equal(F.relu(Tensor([-1.0, 0.0, 2.0])).data, [0.0, 0.0, 2.0])
    pooled = F.max_pool2(Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)))
    np.testing.assert_array_equal(pooled.data, [[[[4.0]]]])
    up = F.upsample_nearest(Tensor(np.full((1, 1, 1, 1), 5.0)))
    np.testing.assert_array_equal(up.data, np.full((1, 1, 2, 2), 5.0))


def test_max_pool_tie_routes_gradient_to_first_element():
    x = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
    backward(F.max_pool2(x).sum())
    np.testing.assert_array_equal(x.grad[0, 0], [[1.0, 0.0], [0.0, 0.0]])


def test_max_pool_rejects_odd_extents():
    with pytest.raises(ShapeError):
        F.max_pool2(Tensor(np.ones((1, 1, 3, 4))))


@pytest.mark.parametrize("seed", range(20))
def test_pool_and_upsample_gradients(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((1, 2, 4, 6))
    assert grad_check(F.max_pool2, x) <= 1e-4
    assert grad_check(F.upsample_nearest, x) <= 1e-4


@pytest.mark.parametrize("k", [1, 3])
def test_dynamic_depthwise_conv_gradients(k, rng):
    x = Tensor(rng.standard_normal((2, 3, 5, 5)))
    weight = rng.standard_normal((2, 3, k, k))
    bias = rng.standard_normal((2, 3))
    assert grad_check(lambda t: F.dynamic_depthwise_conv(t, Tensor(weight), Tensor(bias)), x.data) <= 1e-4
    assert grad_check(lambda w: F.dynamic_depthwise_conv(x, w, Tensor(bias)), weight) <= 1e-4
    assert grad_check(lambda b: F.dynamic_depthwise_conv(x, Tensor(weight), b), bias) <= 1e-4


def test_conv2d_module_counts_parameters(rng):
    conv = Conv2d(2, 4, 3, rng)
    assert conv.num_params() == 2 * 4 * 9 + 4
