import csv

import numpy as np
import pytest

from plugnorm.core import Tensor
from plugnorm.errors import ConfigError
from plugnorm.nn.module import Conv2d
from plugnorm.nn.style import DinUnit
from plugnorm.nn.unet import LayerTrace, PlugSpec, UNetConfig, build_unet
from plugnorm.pipeline import build_method, shape_units
from plugnorm.profiler import (
    PROFILE_HEADER,
    conv_flops,
    count_flops,
    count_params,
    layer_flops,
    profile_method,
    time_inference,
    time_pipeline,
    write_profile,
)


def test_pointwise_conv_flops():
    assert conv_flops(1, 1, 1, 4, 4) == 48
    conv = Conv2d(1, 1, 1, np.random.default_rng(0))
    trace = LayerTrace("conv", "conv", (1, 1, 4, 4), (1, 1, 4, 4), conv)
    assert layer_flops(trace) == 48


def test_conv_parameters():
    assert count_params(Conv2d(2, 4, 3, np.random.default_rng(0))) == 76


def test_din_unit_flops_by_hand():
    unit = DinUnit.identity("bottleneck", 256)
    shape = (1, 256, 25, 25)
    trace = LayerTrace("plug.bottleneck", "din", shape, shape, unit, transfer=True)
    elements = 256 * 25 * 25
    assert layer_flops(trace) == 5 * elements + 2 * elements + elements


def test_elementwise_layer_rules():
    shape = (2, 3, 4, 4)
    assert layer_flops(LayerTrace("relu", "relu", shape, shape)) == 96
    assert layer_flops(LayerTrace("pool", "max_pool", (2, 3, 8, 8), shape)) == 288
    assert layer_flops(LayerTrace("up", "upsample", (2, 3, 2, 2), shape)) == 0
    assert layer_flops(LayerTrace("norm", "in", shape, shape)) == 480
    assert layer_flops(LayerTrace("norm", "adain", shape, shape)) == 672


def test_flops_are_additive(tiny_net, tiny_config):
    shape = (1, 1, 32, 32)
    units = shape_units(tiny_net)
    plugs = PlugSpec.multi(units.din, tiny_config)
    traces = tiny_net.trace(shape, plugs)
    transfer, whole = count_flops(tiny_net, shape, plugs)
    assert whole == sum(layer_flops(trace) for trace in traces)
    assert transfer == sum(layer_flops(trace) for trace in traces if trace.transfer)
    _, baseline = count_flops(tiny_net, shape)
    assert whole - baseline == transfer
    assert count_flops(tiny_net, (2, 1, 32, 32), plugs) == (2 * transfer, 2 * whole)


def test_multi_site_units_cost_more_than_single_site():
    net = build_unet(UNetConfig(), seed=0)
    units = shape_units(net)
    single = count_params(PlugSpec.single(units.din))
    multi = count_params(PlugSpec.multi(units.din, net.config))
    assert single == 2 * 256
    assert multi / single == pytest.approx(1.875)


def test_transfer_is_a_tiny_fraction_of_the_pipeline():
    net = build_unet(UNetConfig(base_width=64), seed=0)
    units = shape_units(net)
    shape = (1, 1, 400, 400)
    transfer, whole = count_flops(net, shape, PlugSpec.single(units.din))
    assert transfer == 8 * 1024 * 25 * 25
    assert transfer / whole < 1e-4
    transfer, whole = count_flops(net, shape, PlugSpec.multi(units.din, net.config))
    assert transfer / whole < 1e-3


def test_profile_report_params(tiny_net):
    method = build_method("m-adainseg", tiny_net, shape_units(tiny_net))
    report = profile_method(method.name, tiny_net, (1, 1, 16, 16), method.plugs)
    assert report.params_transfer == 2 * sum(tiny_net.sites.values())
    assert report.params_whole == tiny_net.num_params() + report.params_transfer
    assert np.isnan(report.time_whole_ms)

    baseline = profile_method("baseline", tiny_net, (1, 1, 16, 16), PlugSpec())
    assert baseline.flops_transfer == 0 and baseline.params_transfer == 0
    assert baseline.params_whole == tiny_net.num_params()


def test_time_inference_requires_enough_repetitions():
    with pytest.raises(ConfigError):
        time_inference(lambda: None, warmup=2)
    with pytest.raises(ConfigError):
        time_inference(lambda: None, reps=9)


def test_time_inference_counts_calls():
    calls = []
    timing = time_inference(lambda: calls.append(1), warmup=3, reps=12)
    assert len(calls) == 15
    assert len(timing.samples_ms) == 12
    assert timing.median_ms >= 0.0 and timing.iqr_ms >= 0.0


def test_transfer_time_is_below_whole_time(tiny_net, rng):
    plugs = PlugSpec.single(shape_units(tiny_net).din)
    x = Tensor(rng.uniform(size=(1, 1, 32, 32)))
    transfer, whole = time_pipeline(tiny_net, x, plugs)
    assert transfer.median_ms <= whole.median_ms


def test_profile_csv(tmp_path, tiny_net):
    plugs = PlugSpec.single(shape_units(tiny_net).din)
    report = profile_method("s-dinseg", tiny_net, (1, 1, 16, 16), plugs, timing_net=tiny_net, timing_plugs=plugs)
    assert report.time_transfer_ms <= report.time_whole_ms
    path = write_profile(tmp_path / "profile.csv", [report])
    with open(path, newline="") as f:
        header, row = list(csv.reader(f))
    assert header == PROFILE_HEADER
    assert row[0] == "s-dinseg" and int(row[1]) == report.flops_transfer
