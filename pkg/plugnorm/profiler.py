"""
Complexity accounting split into Transfer (plugged units only) and Whole
(the entire segmentation pipeline, units included).

FLOP convention: one multiply-accumulate is 2 FLOPs. A convolution costs
2 * Cout * Cin / groups * k^2 * Hout * Wout plus Cout * Hout * Wout for the
bias, per sample. Instance normalization costs 5 FLOPs per element (mean,
centre, square, variance, scale). ReLU costs 1 per element, 2 x 2 max
pooling 3 comparisons per output, upsampling and concatenation nothing.
AdaIN adds a scale and a shift per element on top of normalization; DIN
adds a depthwise convolution (2 * C * k^2 * H * W) and a bias (C * H * W).
"""
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

import humanize
import numpy as np
from loguru import logger

from plugnorm.core.tensor import Tensor, no_grad
from plugnorm.errors import ConfigError
from plugnorm.nn.module import Module
from plugnorm.nn.unet import LayerTrace, PlugSpec, Shape, UNet
from plugnorm.utils.helpers import write_csv

NORM_FLOPS_PER_ELEMENT = 5
AFFINE_FLOPS_PER_ELEMENT = 2
RELU_FLOPS_PER_ELEMENT = 1
POOL_FLOPS_PER_OUTPUT = 3


@dataclass(frozen=True)
class ProfileReport:
    method: str
    flops_transfer: int
    flops_whole: int
    params_transfer: int
    params_whole: int
    time_transfer_ms: float = float("nan")
    time_whole_ms: float = float("nan")

    def row(self) -> list[Any]:
        return [
            self.method,
            self.flops_transfer,
            self.flops_whole,
            self.params_transfer,
            self.params_whole,
            f"{self.time_transfer_ms:.4f}",
            f"{self.time_whole_ms:.4f}",
        ]


@dataclass(frozen=True)
class Timing:
    median_ms: float
    iqr_ms: float
    samples_ms: tuple[float, ...]


def count_params(obj: Any) -> int:
    """Exact scalar count of a module, a transfer unit or a plug spec."""
    if isinstance(obj, Module):
        return obj.num_params()
    return int(obj.num_params)


def _elements(shape: Shape) -> int:
    return int(np.prod(shape))


def conv_flops(
    out_channels: int, in_channels: int, kernel_size: int, out_h: int, out_w: int, groups: int = 1, bias: bool = True
) -> int:
    macs = out_channels * (in_channels // groups) * kernel_size**2 * out_h * out_w
    return 2 * macs + (out_channels * out_h * out_w if bias else 0)


def layer_flops(layer: LayerTrace) -> int:
    n, channels, height, width = layer.output_shape
    elements = _elements(layer.output_shape)
    if layer.kind == "conv":
        conv = layer.module
        return n * conv_flops(conv.out_channels, conv.in_channels, conv.kernel_size, height, width, conv.groups)
    if layer.kind == "relu":
        return RELU_FLOPS_PER_ELEMENT * elements
    if layer.kind == "max_pool":
        return POOL_FLOPS_PER_OUTPUT * elements
    if layer.kind in ("upsample", "concat"):
        return 0
    if layer.kind == "in":
        return NORM_FLOPS_PER_ELEMENT * elements
    if layer.kind == "adain":
        return (NORM_FLOPS_PER_ELEMENT + AFFINE_FLOPS_PER_ELEMENT) * elements
    if layer.kind == "din":
        k = layer.module.kernel_size
        depthwise = n * conv_flops(channels, channels, k, height, width, groups=channels, bias=True)
        return NORM_FLOPS_PER_ELEMENT * elements + depthwise
    raise ValueError(f"No FLOP rule for layer kind `{layer.kind}`.")


def count_flops(net: UNet, input_shape: Shape, plugs: PlugSpec | None = None) -> tuple[int, int]:
    """(transfer, whole) FLOPs of one forward pass; whole is the sum over every layer."""
    transfer = whole = 0
    for layer in net.trace(input_shape, plugs):
        flops = layer_flops(layer)
        whole += flops
        if layer.transfer:
            transfer += flops
    return transfer, whole


def _timer_resolution_ms() -> float:
    return time.get_clock_info("perf_counter").resolution * 1e3


def time_inference(fn: Callable[[], Any], warmup: int = 3, reps: int = 10) -> Timing:
    """
    Median and interquartile range of `reps` timed calls after `warmup` untimed ones.

    Needs the process to itself; concurrent work skews the numbers.
    """
    if warmup < 3 or reps < 10:
        raise ConfigError(f"Timing needs warmup >= 3 and reps >= 10, got {warmup} and {reps}.")
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - start) * 1e3)

    q1, _, q3 = statistics.quantiles(samples, n=4)
    median = statistics.median(samples)
    resolution = _timer_resolution_ms()
    if median <= resolution:
        logger.warning(
            f"Measured {median:.6f} ms is below the timer resolution ({resolution:.6f} ms); "
            "the timing is not meaningful."
        )
    return Timing(median, q3 - q1, tuple(samples))


def time_pipeline(
    net: UNet, x: Tensor, plugs: PlugSpec, warmup: int = 3, reps: int = 10
) -> tuple[Timing, Timing]:
    """
    Time the plugged units alone on cached site features, and the whole forward pass.

    Both run without the tape.
    """
    with no_grad():
        features = net.encode(x)

        def transfer() -> None:
            for site in plugs:
                plugs[site](features[site])

        transfer_timing = time_inference(transfer, warmup, reps)
        whole_timing = time_inference(lambda: net(x, plugs), warmup, reps)
    return transfer_timing, whole_timing


def profile_method(
    method: str,
    net: UNet,
    input_shape: Shape,
    plugs: PlugSpec,
    timing_net: UNet | None = None,
    timing_plugs: PlugSpec | None = None,
    warmup: int = 3,
    reps: int = 10,
) -> ProfileReport:
    """
    Count FLOPs and parameters on `net` and, when `timing_net` is given, time
    `timing_net` with `timing_plugs` on a random input of `input_shape`.
    """
    flops_transfer, flops_whole = count_flops(net, input_shape, plugs)
    params_transfer = count_params(plugs)
    params_whole = count_params(net) + params_transfer
    logger.info(
        f"{method}: FLOPs transfer {humanize.intword(flops_transfer)} / whole "
        f"{humanize.intword(flops_whole)}, params transfer {humanize.intcomma(params_transfer)} / whole "
        f"{humanize.intcomma(params_whole)}"
    )

    time_transfer = time_whole = float("nan")
    if timing_net is not None:
        rng = np.random.default_rng(0)
        x = Tensor(rng.uniform(0, 1, size=input_shape), dtype=timing_net.dtype)
        transfer, whole = time_pipeline(timing_net, x, timing_plugs or PlugSpec(), warmup, reps)
        time_transfer, time_whole = transfer.median_ms, whole.median_ms
        logger.info(
            f"{method}: time transfer {time_transfer:.3f} ms (IQR {transfer.iqr_ms:.3f}), "
            f"whole {time_whole:.3f} ms (IQR {whole.iqr_ms:.3f})"
        )

    return ProfileReport(
        method, flops_transfer, flops_whole, params_transfer, params_whole, time_transfer, time_whole
    )


PROFILE_HEADER = [
    "method",
    "flops_transfer",
    "flops_whole",
    "params_transfer",
    "params_whole",
    "time_transfer",
    "time_whole",
]


def write_profile(path: Path | str, reports: Iterable[ProfileReport]) -> Path:
    return write_csv(path, PROFILE_HEADER, (report.row() for report in reports))
