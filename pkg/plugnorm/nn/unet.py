"""
U-Net segmentation network with declared plug sites.

Sites: `bottleneck` is the output of the last encoder block before decoding.
`skip1`..`skip3` are the three deepest skip connections ordered shallowest
to deepest, so `skip3` is the skip consumed first by the decoder. A plugged
unit transforms the site feature on its way downstream (before decoding, or
before concatenation on a skip path); the encoder itself always runs on the
untransformed features.
"""
import hashlib
from dataclasses import dataclass
from typing import Any, Iterator, Literal, Mapping

import numpy as np

from plugnorm.constants import PLUG_SITES, SINGLE_SITES
from plugnorm.core.tensor import Tensor, concat
from plugnorm.errors import ConfigError, PlugSiteError, ShapeError
from plugnorm.nn import functional as F
from plugnorm.nn.module import Conv2d, Module
from plugnorm.nn.style import TransferUnit

Shape = tuple[int, ...]
LayerKind = Literal["conv", "relu", "max_pool", "upsample", "concat", "in", "adain", "din"]


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int = 1
    base_width: int = 16
    depth: int = 4
    out_channels: int = 1

    def __post_init__(self) -> None:
        for name in ("in_channels", "base_width", "depth", "out_channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"unet.{name} must be at least 1, got {getattr(self, name)}.")

    @property
    def widths(self) -> list[int]:
        """Channel widths per level, the last one being the bottleneck."""
        return [self.base_width * 2**level for level in range(self.depth + 1)]

    @property
    def factor(self) -> int:
        return 2**self.depth

    def check_input(self, shape: Shape) -> None:
        if len(shape) != 4 or shape[1] != self.in_channels:
            raise ShapeError(f"Expected N x {self.in_channels} x H x W input, got {shape}.")
        if shape[2] % self.factor or shape[3] % self.factor:
            raise ShapeError(
                f"Spatial extents {shape[2]}x{shape[3]} must be divisible by {self.factor}."
            )

    def skip_level(self, site: str) -> int:
        """Encoder level whose output feeds skip site `skip1`..`skip3`."""
        return self.depth - 4 + int(site[len("skip") :])

    @property
    def sites(self) -> dict[str, int]:
        """Declared plug sites mapped to their channel widths."""
        sites = {"bottleneck": self.widths[-1]}
        for site in PLUG_SITES[1:]:
            level = self.skip_level(site)
            if level >= 0:
                sites[site] = self.widths[level]
        return sites

    def site_for_level(self, level: int) -> str | None:
        site = f"skip{level - self.depth + 4}"
        return site if site in self.sites else None


class PlugSpec(Mapping[str, TransferUnit]):
    """Which transfer unit, if any, re-styles the feature at each plug site."""

    def __init__(self, units: Mapping[str, TransferUnit | None] | None = None) -> None:
        self._units: dict[str, TransferUnit] = {}
        for site, unit in (units or {}).items():
            if site not in PLUG_SITES:
                raise PlugSiteError(f"`{site}` is not a plug site (expected one of {PLUG_SITES}).")
            if unit is not None:
                self._units[site] = unit

    @classmethod
    def from_units(cls, units: Mapping[str, TransferUnit], sites: tuple[str, ...]) -> "PlugSpec":
        missing = [site for site in sites if site not in units]
        if missing:
            raise PlugSiteError(f"No unit available for site(s) {missing}.")
        return cls({site: units[site] for site in sites})

    @classmethod
    def single(cls, units: Mapping[str, TransferUnit]) -> "PlugSpec":
        return cls.from_units(units, SINGLE_SITES)

    @classmethod
    def multi(cls, units: Mapping[str, TransferUnit], config: UNetConfig) -> "PlugSpec":
        return cls.from_units(units, tuple(config.sites))

    def __getitem__(self, site: str) -> TransferUnit:
        return self._units[site]

    def __iter__(self) -> Iterator[str]:
        return iter(self._units)

    def __len__(self) -> int:
        return len(self._units)

    def __repr__(self) -> str:
        return f"PlugSpec({self.describe()})"

    def describe(self) -> dict[str, str]:
        return {site: unit.kind for site, unit in self._units.items()}

    @property
    def num_params(self) -> int:
        return sum(unit.num_params for unit in self._units.values())

    def validate(self, config: UNetConfig) -> None:
        sites = config.sites
        for site, unit in self._units.items():
            if site not in sites:
                raise PlugSiteError(f"Site `{site}` does not exist at depth {config.depth}.")
            if unit.layer_id != site:
                raise PlugSiteError(f"Unit for `{unit.layer_id}` cannot be plugged at `{site}`.")
            if unit.channels is not None and unit.channels != sites[site]:
                raise PlugSiteError(
                    f"Unit at `{site}` has {unit.channels} channels, the site has {sites[site]}."
                )

    def apply(self, site: str | None, features: Tensor) -> Tensor:
        unit = self._units.get(site) if site is not None else None
        return features if unit is None else unit(features)


@dataclass(frozen=True)
class LayerTrace:
    """Shape-level record of one layer application, used for complexity accounting."""

    name: str
    kind: LayerKind
    input_shape: Shape
    output_shape: Shape
    module: Any = None
    transfer: bool = False


class DoubleConv(Module):
    """conv 3x3 -> relu -> conv 3x3 -> relu."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, dtype: Any) -> None:
        self.conv1 = Conv2d(in_channels, out_channels, 3, rng, padding=1, dtype=dtype)
        self.conv2 = Conv2d(out_channels, out_channels, 3, rng, padding=1, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return F.relu(self.conv2(F.relu(self.conv1(x))))

    def trace(self, name: str, shape: Shape) -> tuple[list[LayerTrace], Shape]:
        traces = []
        for index, conv in enumerate((self.conv1, self.conv2), start=1):
            out = (shape[0], conv.out_channels, *conv.output_size(*shape[2:]))
            traces.append(LayerTrace(f"{name}.conv{index}", "conv", shape, out, conv))
            traces.append(LayerTrace(f"{name}.relu{index}", "relu", out, out))
            shape = out
        return traces, shape


class UNet(Module):
    """Encoder-decoder with skip connections, max pooling and nearest upsampling."""

    def __init__(self, config: UNetConfig, rng: np.random.Generator, dtype: Any = np.float32) -> None:
        self.config = config
        widths = config.widths
        in_widths = [config.in_channels, *widths[:-2]]
        self.encoders = [
            DoubleConv(in_width, width, rng, dtype)
            for in_width, width in zip(in_widths, widths[:-1])
        ]
        self.bottleneck = DoubleConv(widths[-2], widths[-1], rng, dtype)
        self.decoders = [
            DoubleConv(widths[level + 1] + widths[level], widths[level], rng, dtype)
            for level in reversed(range(config.depth))
        ]
        self.head = Conv2d(widths[0], config.out_channels, 1, rng, dtype=dtype)

    @property
    def sites(self) -> dict[str, int]:
        return self.config.sites

    def encode(self, x: Tensor) -> dict[str, Tensor]:
        """
        Run the encoder and return features keyed by `enc0`..`enc{depth-1}`,
        `bottleneck`, and the skip site aliases.
        """
        self.config.check_input(x.shape)
        features: dict[str, Tensor] = {}
        h = x
        for level, block in enumerate(self.encoders):
            h = block(h)
            features[f"enc{level}"] = h
            h = F.max_pool2(h)
        features["bottleneck"] = self.bottleneck(h)
        for site in self.sites:
            if site != "bottleneck":
                features[site] = features[f"enc{self.config.skip_level(site)}"]
        return features

    def forward(self, x: Tensor, plugs: PlugSpec | None = None) -> Tensor:
        """Foreground logits (N, out_channels, H, W)."""
        plugs = plugs if plugs is not None else PlugSpec()
        plugs.validate(self.config)
        features = self.encode(x)

        h = plugs.apply("bottleneck", features["bottleneck"])
        for level, block in zip(reversed(range(self.config.depth)), self.decoders):
            skip = plugs.apply(self.config.site_for_level(level), features[f"enc{level}"])
            h = block(concat([F.upsample_nearest(h), skip], axis=1))
        return self.head(h)

    def trace(self, input_shape: Shape, plugs: PlugSpec | None = None) -> list[LayerTrace]:
        """Every layer application of `forward`, in execution order, by shape only."""
        self.config.check_input(input_shape)
        plugs = plugs if plugs is not None else PlugSpec()
        plugs.validate(self.config)
        traces: list[LayerTrace] = []
        skips: list[Shape] = []

        shape = tuple(input_shape)
        for level, block in enumerate(self.encoders):
            block_traces, shape = block.trace(f"encoders.{level}", shape)
            traces += block_traces
            skips.append(shape)
            pooled = (*shape[:2], shape[2] // 2, shape[3] // 2)
            traces.append(LayerTrace(f"pool{level}", "max_pool", shape, pooled))
            shape = pooled
        block_traces, shape = self.bottleneck.trace("bottleneck", shape)
        traces += block_traces
        traces += self._trace_plug(plugs, "bottleneck", shape)

        for level, block in zip(reversed(range(self.config.depth)), self.decoders):
            traces += self._trace_plug(plugs, self.config.site_for_level(level), skips[level])
            up = (*shape[:2], shape[2] * 2, shape[3] * 2)
            traces.append(LayerTrace(f"up{level}", "upsample", shape, up))
            joined = (up[0], up[1] + skips[level][1], *up[2:])
            traces.append(LayerTrace(f"concat{level}", "concat", up, joined))
            block_traces, shape = block.trace(f"decoders.{self.config.depth - 1 - level}", joined)
            traces += block_traces

        out = (shape[0], self.head.out_channels, *shape[2:])
        traces.append(LayerTrace("head", "conv", shape, out, self.head))
        return traces

    @staticmethod
    def _trace_plug(plugs: PlugSpec, site: str | None, shape: Shape) -> list[LayerTrace]:
        if site is None or site not in plugs:
            return []
        unit = plugs[site]
        return [LayerTrace(f"plug.{site}", unit.kind, shape, shape, unit, transfer=True)]


def build_unet(config: UNetConfig, seed: int, dtype: Any = np.float32) -> UNet:
    """He-uniform initialization drawn from `seed`; the same seed gives identical parameters."""
    return UNet(config, np.random.default_rng(seed), dtype)


def forward_with_plugs(net: UNet, x: Tensor, plugs: PlugSpec | None = None) -> Tensor:
    return net(x, plugs)


ParameterSnapshot = dict[str, bytes]


def snapshot(net: Module) -> ParameterSnapshot:
    return {name: param.data.tobytes() for name, param in net.named_parameters()}


def snapshot_digest(state: ParameterSnapshot) -> str:
    digest = hashlib.sha256()
    for name in sorted(state):
        digest.update(name.encode())
        digest.update(state[name])
    return digest.hexdigest()


def freeze(net: Module) -> ParameterSnapshot:
    """Exclude `net` from optimization and return a byte snapshot of its parameters."""
    net.freeze()
    return snapshot(net)


def assert_frozen(net: Module, reference: ParameterSnapshot) -> bool:
    """Whether the parameters of `net` are byte-identical to `reference`."""
    return snapshot(net) == reference
