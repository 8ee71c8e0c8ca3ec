"""
Style-transfer units that re-style features in place.

`InstanceNormUnit`, `AdaINUnit` and `DinUnit` all map NCHW features to
features of the same shape and can be plugged at any declared site of the
segmentation network. DIN units carry a depthwise kernel and bias predicted
by a `DinNet` from the features of a style image.
"""
import hashlib
from dataclasses import dataclass, field
from typing import Any, Literal, Protocol

import numpy as np

from plugnorm.constants import EPS, PLUG_SITES
from plugnorm.core.tensor import Tensor, no_grad
from plugnorm.errors import ConfigError, PlugSiteError, ShapeError
from plugnorm.nn import functional as F
from plugnorm.nn.module import Conv2d, Module

UnitKind = Literal["in", "adain", "din"]
DinInit = Literal["identity", "zero", "he"]
DIN_INITS: tuple[DinInit, ...] = ("identity", "zero", "he")
DIN_KERNEL_SIZES = (1, 3)


def _frozen(values: Any, ndim: int) -> np.ndarray:
    array = np.array(values)
    if array.dtype.kind != "f":
        array = array.astype(np.float64)
    if array.ndim != ndim:
        raise ShapeError(f"Expected a {ndim}-d array, got shape {array.shape}.")
    array.flags.writeable = False
    return array


def _check_channels(features: Tensor, channels: int, what: str) -> None:
    if features.ndim != 4 or features.shape[1] != channels:
        raise ShapeError(f"{what} expects {channels} channels, got features {features.shape}.")


class TransferUnit(Protocol):
    kind: UnitKind
    layer_id: str

    @property
    def channels(self) -> int | None:
        ...

    @property
    def num_params(self) -> int:
        ...

    def __call__(self, features: Tensor) -> Tensor:
        ...


def adain(content: Tensor, style_stats: F.ChannelStats, eps: float = EPS) -> Tensor:
    """Instance-normalize `content`, then rescale to the style mean and deviation."""
    _check_channels(content, style_stats.channels, "adain")
    mu, sigma = style_stats.broadcastable()
    return F.instance_norm(content, eps) * sigma.astype(content.dtype) + mu.astype(content.dtype)


@dataclass(frozen=True, eq=False)
class InstanceNormUnit:
    """Plain instance normalization, no style parameters."""

    layer_id: str
    eps: float = EPS
    kind: UnitKind = field(default="in", init=False)

    @property
    def channels(self) -> None:
        return None

    @property
    def num_params(self) -> int:
        return 0

    def __call__(self, features: Tensor) -> Tensor:
        return F.instance_norm(features, self.eps)


@dataclass(frozen=True, eq=False)
class AdaINUnit:
    """AdaIN with cached per-channel style statistics."""

    layer_id: str
    mu: np.ndarray
    sigma: np.ndarray
    source: str = ""
    eps: float = EPS
    kind: UnitKind = field(default="adain", init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", _frozen(self.mu, 1))
        object.__setattr__(self, "sigma", _frozen(self.sigma, 1))
        if self.mu.shape != self.sigma.shape:
            raise ShapeError(f"AdaIN stats {self.mu.shape} and {self.sigma.shape} differ.")

    @property
    def channels(self) -> int:
        return self.mu.shape[0]

    @property
    def num_params(self) -> int:
        return self.mu.size + self.sigma.size

    def stats(self, dtype: Any = np.float64) -> F.ChannelStats:
        return F.ChannelStats(Tensor(self.mu, dtype=dtype), Tensor(self.sigma, dtype=dtype))

    def __call__(self, features: Tensor) -> Tensor:
        return adain(features, self.stats(features.dtype), self.eps)


@dataclass(frozen=True, eq=False)
class DinUnit:
    """
    Cached affine parameters of one plug site.

    `weight` is the depthwise kernel (C, 1, k, k) and `bias` is (C,). Both are
    read-only once the unit exists.
    """

    layer_id: str
    weight: np.ndarray
    bias: np.ndarray
    source: str = ""
    eps: float = EPS
    kind: UnitKind = field(default="din", init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "weight", _frozen(self.weight, 4))
        object.__setattr__(self, "bias", _frozen(self.bias, 1))
        channels, groups, k, k2 = self.weight.shape
        if groups != 1 or k != k2 or k % 2 == 0:
            raise ShapeError(f"DIN kernels must be C x 1 x k x k with odd k, got {self.weight.shape}.")
        if self.bias.shape != (channels,):
            raise ShapeError(f"DIN bias {self.bias.shape} does not match {channels} channels.")

    @classmethod
    def identity(
        cls, layer_id: str, channels: int, kernel_size: int = 1, dtype: Any = np.float64
    ) -> "DinUnit":
        """A unit whose output equals the instance-normalized input."""
        weight = np.zeros((channels, 1, kernel_size, kernel_size), dtype=dtype)
        weight[:, :, kernel_size // 2, kernel_size // 2] = 1
        return cls(layer_id, weight, np.zeros(channels, dtype=dtype), source="identity")

    @property
    def channels(self) -> int:
        return self.weight.shape[0]

    @property
    def kernel_size(self) -> int:
        return self.weight.shape[2]

    @property
    def num_params(self) -> int:
        return self.weight.size + self.bias.size

    def digest(self) -> str:
        return hashlib.sha256(self.weight.tobytes() + self.bias.tobytes()).hexdigest()

    def __call__(self, features: Tensor) -> Tensor:
        return din_forward(features, self)


def dynamic_instance_norm(
    content: Tensor, weight: Tensor, bias: Tensor, eps: float = EPS
) -> Tensor:
    """IN(content) convolved with kernels (N or 1, C, k, k), plus biases (N or 1, C)."""
    return F.dynamic_depthwise_conv(F.instance_norm(content, eps), weight, bias)


def din_forward(content: Tensor, unit: DinUnit) -> Tensor:
    """DIN(F) = IN(F) convolved depthwise with W, plus b."""
    _check_channels(content, unit.channels, f"DIN unit at {unit.layer_id}")
    weight = Tensor(unit.weight[None, :, 0], dtype=content.dtype)
    bias = Tensor(unit.bias[None], dtype=content.dtype)
    return dynamic_instance_norm(content, weight, bias, unit.eps)


class DinNet(Module):
    """
    Predicts DIN parameters from style features of one plug site.

    Both branches run conv(C -> C, 3x3) -> relu -> conv(C -> C, 3x3) and then
    pool adaptively: the weight branch to k x k, the bias branch to 1 x 1, so
    any spatial input size yields fixed-size parameters.
    """

    def __init__(
        self,
        channels: int,
        kernel_size: int = 1,
        rng: np.random.Generator | None = None,
        init: DinInit = "identity",
        dtype: Any = np.float32,
    ) -> None:
        if kernel_size % 2 == 0:
            raise ShapeError(f"DIN kernel size must be odd, got {kernel_size}.")
        if init not in DIN_INITS:
            raise ConfigError(f"Unknown DIN-net initialization `{init}` (expected one of {DIN_INITS}).")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.channels = channels
        self.kernel_size = kernel_size
        self.weight_conv1 = Conv2d(channels, channels, 3, rng, padding=1, dtype=dtype)
        self.weight_conv2 = Conv2d(channels, channels, 3, rng, padding=1, dtype=dtype)
        self.bias_conv1 = Conv2d(channels, channels, 3, rng, padding=1, dtype=dtype)
        self.bias_conv2 = Conv2d(channels, channels, 3, rng, padding=1, dtype=dtype)

        if init in ("identity", "zero"):
            for conv in (self.weight_conv2, self.bias_conv2):
                conv.weight.assign(np.zeros(conv.weight.shape))
                conv.bias.assign(np.zeros(conv.bias.shape))
        if init == "identity":
            # A constant kernel of 1 / k^2 preserves the normalized mean; for k = 1 it is the identity.
            self.weight_conv2.bias.assign(np.full(channels, 1.0 / kernel_size**2))

    def forward(self, style_features: Tensor) -> tuple[Tensor, Tensor]:
        """Return per-image kernels (N, C, k, k) and biases (N, C)."""
        _check_channels(style_features, self.channels, "DinNet")
        n, k = style_features.shape[0], self.kernel_size
        weight = self.weight_conv2(F.relu(self.weight_conv1(style_features)))
        bias = self.bias_conv2(F.relu(self.bias_conv1(style_features)))
        return (
            F.adaptive_avg_pool(weight, k, k),
            F.adaptive_avg_pool(bias, 1, 1).reshape(n, self.channels),
        )


def din_net_forward(style_features: Tensor, net: DinNet) -> tuple[Tensor, Tensor]:
    """Per-image DIN parameters shaped (N, C, 1, k, k) and (N, C)."""
    weight, bias = net(style_features)
    n, c, k, _ = weight.shape
    return weight.reshape(n, c, 1, k, k), bias


def _site_features(encoder: Any, style_images: Any, layer_id: str) -> Tensor:
    if layer_id not in PLUG_SITES:
        raise PlugSiteError(f"`{layer_id}` is not a plug site (expected one of {PLUG_SITES}).")
    images = style_images if isinstance(style_images, Tensor) else Tensor(style_images)
    if images.ndim == 3:
        images = images.reshape(1, *images.shape)
    with no_grad():
        return encoder.encode(images.astype(encoder.dtype))[layer_id]


def extract_unit(
    net: DinNet, encoder: Any, style_images: Any, layer_id: str, source: str = "style"
) -> DinUnit:
    """
    Freeze the parameters the DIN-net predicts for `style_images` at `layer_id`.

    With several style images the predicted parameters are averaged
    elementwise.
    """
    features = _site_features(encoder, style_images, layer_id)
    with no_grad():
        weight, bias = net(features)
    return DinUnit(
        layer_id,
        weight.data.mean(axis=0)[:, None],
        bias.data.mean(axis=0),
        source=f"{source} (n={features.shape[0]})",
    )


def extract_adain_stats(
    encoder: Any, style_images: Any, layer_id: str, source: str = "style", eps: float = EPS
) -> AdaINUnit:
    """Per-image spatial statistics at `layer_id`, averaged over the style images."""
    features = _site_features(encoder, style_images, layer_id)
    with no_grad():
        stats = F.instance_stats(features, eps)
    return AdaINUnit(
        layer_id,
        stats.mu.data.mean(axis=0),
        stats.sigma.data.mean(axis=0),
        source=f"{source} (n={features.shape[0]})",
        eps=eps,
    )
