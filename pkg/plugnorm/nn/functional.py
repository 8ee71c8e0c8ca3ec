"""Convolution, pooling, normalization and statistics on NCHW tensors."""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from plugnorm.constants import EPS
from plugnorm.core.tensor import Tensor, as_tensor, record, relu, sigmoid, unbroadcast
from plugnorm.errors import ShapeError

__all__ = [
    "ChannelStats",
    "adaptive_avg_pool",
    "channel_stats",
    "conv2d",
    "dynamic_depthwise_conv",
    "instance_norm",
    "instance_stats",
    "max_pool2",
    "relu",
    "sigmoid",
    "upsample_nearest",
]


@dataclass(frozen=True)
class ChannelStats:
    """Channel-wise mean and standard deviation, shaped (C,) or (N, C)."""

    mu: Tensor
    sigma: Tensor

    def __post_init__(self) -> None:
        if self.mu.shape != self.sigma.shape:
            raise ShapeError(
                f"Mean {self.mu.shape} and deviation {self.sigma.shape} shapes differ."
            )
        if np.any(self.sigma.data < 0):
            raise ShapeError("Standard deviations must be non-negative.")

    @property
    def channels(self) -> int:
        return self.mu.shape[-1]

    def broadcastable(self) -> tuple[Tensor, Tensor]:
        """Return mu and sigma reshaped to broadcast against NCHW features."""
        shape = (*self.mu.shape[:-1], self.channels, 1, 1)
        if self.mu.ndim == 1:
            shape = (1, *shape)
        return self.mu.reshape(shape), self.sigma.reshape(shape)


def _require_nchw(x: Tensor, op: str) -> None:
    if x.ndim != 4:
        raise ShapeError(f"`{op}` expects batch x channel x height x width, got {x.shape}.")


def _windows(padded: np.ndarray, k: int, stride: int) -> np.ndarray:
    return sliding_window_view(padded, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]


def _pad(data: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return data
    return np.pad(data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _fold(
    columns: np.ndarray, padded_shape: tuple[int, ...], stride: int, padding: int
) -> np.ndarray:
    """Scatter-add window gradients (N, C, Ho, Wo, k, k) back onto the input grid."""
    n, c, ho, wo, k, _ = columns.shape
    grad = np.zeros(padded_shape, dtype=columns.dtype)
    for i in range(k):
        for j in range(k):
            grad[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += columns[
                :, :, :, :, i, j
            ]
    height, width = padded_shape[2] - 2 * padding, padded_shape[3] - 2 * padding
    return grad[:, :, padding : padding + height, padding : padding + width]


def _correlate(windows: np.ndarray, weight: np.ndarray, groups: int) -> np.ndarray:
    channels, out_channels = windows.shape[1], weight.shape[0]
    if groups == 1:
        out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))
        return np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    if groups == channels == out_channels:
        return np.einsum("nchwij,cij->nchw", windows, weight[:, 0])

    cg, og = channels // groups, out_channels // groups
    parts = [
        np.tensordot(
            windows[:, g * cg : (g + 1) * cg],
            weight[g * og : (g + 1) * og],
            axes=([1, 4, 5], [1, 2, 3]),
        ).transpose(0, 3, 1, 2)
        for g in range(groups)
    ]
    return np.concatenate(parts, axis=1)


def _weight_grad(grad: np.ndarray, windows: np.ndarray, groups: int, shape: tuple) -> np.ndarray:
    channels, out_channels = windows.shape[1], shape[0]
    if groups == 1:
        return np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
    if groups == channels == out_channels:
        return np.einsum("nchw,nchwij->cij", grad, windows)[:, None]

    cg, og = channels // groups, out_channels // groups
    parts = [
        np.tensordot(
            grad[:, g * og : (g + 1) * og],
            windows[:, g * cg : (g + 1) * cg],
            axes=([0, 2, 3], [0, 2, 3]),
        )
        for g in range(groups)
    ]
    return np.concatenate(parts, axis=0)


def _column_grad(grad: np.ndarray, weight: np.ndarray, groups: int) -> np.ndarray:
    out_channels = weight.shape[0]
    if groups == 1:
        return np.tensordot(grad, weight, axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
    if groups == out_channels and weight.shape[1] == 1:
        return grad[..., None, None] * weight[:, 0][None, :, None, None]

    og = out_channels // groups
    parts = [
        np.tensordot(grad[:, g * og : (g + 1) * og], weight[g * og : (g + 1) * og], axes=([1], [0]))
        for g in range(groups)
    ]
    return np.concatenate(parts, axis=3).transpose(0, 3, 1, 2, 4, 5)


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """
    Cross-correlate `x` (N, C, H, W) with `weight` (O, C / groups, k, k).

    Output extents are floor((H + 2 * padding - k) / stride) + 1.
    """
    _require_nchw(x, "conv2d")
    weight = as_tensor(weight, like=x)
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ShapeError(f"conv2d needs a square O x C x k x k kernel, got {weight.shape}.")

    n, channels, height, width = x.shape
    out_channels, group_channels, k, _ = weight.shape
    if channels % groups or out_channels % groups or group_channels != channels // groups:
        raise ShapeError(
            f"Kernel {weight.shape} does not fit {channels} input channels in {groups} groups."
        )
    if bias is not None:
        bias = as_tensor(bias, like=x)
        if bias.shape != (out_channels,):
            raise ShapeError(f"Bias {bias.shape} does not match {out_channels} output channels.")
    if height + 2 * padding < k or width + 2 * padding < k:
        raise ShapeError(f"Input {x.shape} with padding {padding} is smaller than kernel {k}.")

    padded = _pad(x.data, padding)
    windows = _windows(padded, k, stride)
    out = _correlate(windows, weight.data, groups)
    if bias is not None:
        out = out + bias.data[:, None, None]

    def backward(grad: np.ndarray) -> tuple:
        grad_x = grad_w = grad_b = None
        if x.requires_grad:
            columns = _column_grad(grad, weight.data, groups)
            grad_x = _fold(columns, padded.shape, stride, padding)
        if weight.requires_grad:
            grad_w = _weight_grad(grad, windows, groups, weight.shape)
        if bias is not None and bias.requires_grad:
            grad_b = grad.sum(axis=(0, 2, 3))
        return grad_x, grad_w, grad_b

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record("conv2d", out.astype(x.dtype, copy=False), inputs, backward)


def dynamic_depthwise_conv(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """
    Per-sample depthwise convolution with predicted kernels.

    `weight` is (N or 1, C, k, k) with odd k, padded by k // 2 so the output
    keeps the input extents; `bias` is (N or 1, C). A 1 x 1 kernel reduces to
    a per-channel scale and shift.
    """
    _require_nchw(x, "dynamic_depthwise_conv")
    weight, bias = as_tensor(weight, like=x), as_tensor(bias, like=x)
    n, channels = x.shape[:2]
    if weight.ndim != 4 or weight.shape[1] != channels or weight.shape[0] not in (1, n):
        raise ShapeError(f"Dynamic kernel {weight.shape} does not match features {x.shape}.")
    if bias.ndim != 2 or bias.shape[1] != channels or bias.shape[0] not in (1, n):
        raise ShapeError(f"Dynamic bias {bias.shape} does not match features {x.shape}.")
    k = weight.shape[2]
    if k % 2 == 0 or weight.shape[3] != k:
        raise ShapeError(f"Dynamic kernels must be square with odd size, got {weight.shape}.")

    shift = bias.reshape(bias.shape[0], channels, 1, 1)
    if k == 1:
        return x * weight.reshape(weight.shape[0], channels, 1, 1) + shift

    padding = k // 2
    padded = _pad(x.data, padding)
    windows = _windows(padded, k, 1)
    kernels = np.broadcast_to(weight.data, (n, channels, k, k))
    out = np.einsum("nchwij,ncij->nchw", windows, kernels)

    def backward(grad: np.ndarray) -> tuple:
        grad_x = grad_w = None
        if x.requires_grad:
            columns = grad[..., None, None] * kernels[:, :, None, None]
            grad_x = _fold(columns, padded.shape, 1, padding)
        if weight.requires_grad:
            grad_w = unbroadcast(np.einsum("nchw,nchwij->ncij", grad, windows), weight.shape)
        return grad_x, grad_w

    return record("dynamic_conv", out.astype(x.dtype, copy=False), (x, weight), backward) + shift


def instance_norm(x: Tensor, eps: float = EPS) -> Tensor:
    """Standardize every (sample, channel) plane: (x - mu) / sqrt(var + eps)."""
    _require_nchw(x, "instance_norm")
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=(2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    normalized = centered * inv_std

    def backward(grad: np.ndarray) -> tuple:
        grad_mean = grad.mean(axis=(2, 3), keepdims=True)
        grad_proj = (grad * normalized).mean(axis=(2, 3), keepdims=True)
        return (inv_std * (grad - grad_mean - normalized * grad_proj),)

    return record("instance_norm", normalized.astype(x.dtype, copy=False), (x,), backward)


def _stats(x: Tensor, axis: tuple[int, ...], eps: float) -> tuple[Tensor, Tensor]:
    mu = x.mean(axis=axis, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=axis, keepdims=True)
    return mu, (var + eps).sqrt()


def channel_stats(x: Tensor, eps: float = EPS) -> ChannelStats:
    """Batch-pooled statistics: mean and sqrt(var + eps) over N, H and W per channel."""
    _require_nchw(x, "channel_stats")
    channels = x.shape[1]
    mu, sigma = _stats(x, (0, 2, 3), eps)
    return ChannelStats(mu.reshape(channels), sigma.reshape(channels))


def instance_stats(x: Tensor, eps: float = EPS) -> ChannelStats:
    """Per-sample statistics over H and W, shaped (N, C)."""
    _require_nchw(x, "instance_stats")
    n, channels = x.shape[:2]
    mu, sigma = _stats(x, (2, 3), eps)
    return ChannelStats(mu.reshape(n, channels), sigma.reshape(n, channels))


def _bins(size: int, count: int) -> list[tuple[int, int]]:
    return [(i * size // count, (i + 1) * size // count) for i in range(count)]


def adaptive_avg_pool(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """
    Average over a fixed out_h x out_w grid of bins.

    Bin i spans rows [floor(i * H / out_h), floor((i + 1) * H / out_h)), and
    likewise for columns.
    """
    _require_nchw(x, "adaptive_avg_pool")
    height, width = x.shape[2:]
    if not (1 <= out_h <= height and 1 <= out_w <= width):
        raise ShapeError(f"Cannot pool {height}x{width} down to {out_h}x{out_w}.")

    rows, cols = _bins(height, out_h), _bins(width, out_w)
    out = np.empty((*x.shape[:2], out_h, out_w), dtype=x.dtype)
    for i, (r0, r1) in enumerate(rows):
        for j, (c0, c1) in enumerate(cols):
            out[:, :, i, j] = x.data[:, :, r0:r1, c0:c1].mean(axis=(2, 3))

    def backward(grad: np.ndarray) -> tuple:
        grad_x = np.zeros(x.shape, dtype=grad.dtype)
        for i, (r0, r1) in enumerate(rows):
            for j, (c0, c1) in enumerate(cols):
                count = (r1 - r0) * (c1 - c0)
                grad_x[:, :, r0:r1, c0:c1] += grad[:, :, i, j][:, :, None, None] / count
        return (grad_x,)

    return record("adaptive_avg_pool", out, (x,), backward)


def max_pool2(x: Tensor) -> Tensor:
    """2 x 2 max pooling with stride 2; ties route the gradient to the first element."""
    _require_nchw(x, "max_pool2")
    n, c, height, width = x.shape
    if height % 2 or width % 2:
        raise ShapeError(f"max_pool2 needs even spatial extents, got {height}x{width}.")

    blocks = (
        x.data.reshape(n, c, height // 2, 2, width // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, height // 2, width // 2, 4)
    )
    winners = blocks.argmax(axis=-1)[..., None]
    out = np.take_along_axis(blocks, winners, axis=-1)[..., 0]

    def backward(grad: np.ndarray) -> tuple:
        routed = np.zeros(blocks.shape, dtype=grad.dtype)
        np.put_along_axis(routed, winners, grad[..., None], axis=-1)
        return (
            routed.reshape(n, c, height // 2, width // 2, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, height, width),
        )

    return record("max_pool2", out, (x,), backward)


def upsample_nearest(x: Tensor) -> Tensor:
    """Double both spatial extents by repeating every value into a 2 x 2 block."""
    _require_nchw(x, "upsample_nearest")
    n, c, height, width = x.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)
    return record(
        "upsample_nearest",
        out,
        (x,),
        lambda grad: (grad.reshape(n, c, height, 2, width, 2).sum(axis=(3, 5)),),
    )
