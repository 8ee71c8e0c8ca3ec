import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plugnorm.core import Tensor, backward
from plugnorm.errors import CheckpointError, ConfigError, ConfigMismatchError, PlugSiteError, ShapeError
from plugnorm.nn.checkpoint import (
    UnitSet,
    checkpoint_digest,
    load_din_nets,
    load_network,
    load_units,
    save_din_nets,
    save_network,
    save_units,
)
from plugnorm.nn.optim import Adam
from plugnorm.nn.style import AdaINUnit, DinNet, DinUnit, InstanceNormUnit
from plugnorm.nn.unet import PlugSpec, UNetConfig, assert_frozen, build_unet, forward_with_plugs, freeze, snapshot


def closed_form_params(config: UNetConfig) -> int:
    def conv(cin, cout, k):
        return cout * cin * k * k + cout

    def double(cin, cout):
        return conv(cin, cout, 3) + conv(cout, cout, 3)

    widths = config.widths
    total = double(config.in_channels, widths[0])
    total += sum(double(widths[i - 1], widths[i]) for i in range(1, config.depth + 1))
    total += sum(double(widths[i + 1] + widths[i], widths[i]) for i in range(config.depth))
    return total + conv(widths[0], config.out_channels, 1)


def test_config_rejects_invalid_values():
    with pytest.raises(ConfigError):
        UNetConfig(base_width=0)


def test_default_sites_are_bottleneck_and_three_deepest_skips():
    config = UNetConfig()
    assert config.sites == {"bottleneck": 256, "skip1": 32, "skip2": 64, "skip3": 128}


def test_shallow_network_declares_fewer_skip_sites():
    assert list(UNetConfig(depth=2).sites) == ["bottleneck", "skip2", "skip3"]


def test_same_seed_gives_identical_parameters():
    a = build_unet(UNetConfig(base_width=4), seed=7)
    b = build_unet(UNetConfig(base_width=4), seed=7)
    assert snapshot(a) == snapshot(b)
    assert snapshot(a) != snapshot(build_unet(UNetConfig(base_width=4), seed=8))


def test_parameter_count_matches_closed_form():
    config = UNetConfig()
    assert build_unet(config, seed=0).num_params() == closed_form_params(config)


def test_bottleneck_resolution(tiny_net):
    features = tiny_net.encode(Tensor(np.zeros((1, 1, 64, 64))))
    assert features["bottleneck"].shape[2:] == (4, 4)
    assert features["skip3"] is features["enc3"]


def test_input_extents_must_divide_by_depth_factor(tiny_net):
    with pytest.raises(ShapeError):
        tiny_net(Tensor(np.zeros((1, 1, 24, 16))))


@given(st.integers(0, 2**16))
def test_empty_plug_spec_is_bitwise_baseline(seed):
    net = build_unet(UNetConfig(base_width=2), seed=0, dtype=np.float64)
    x = Tensor(np.random.default_rng(seed).uniform(size=(1, 1, 16, 16)))
    baseline = net(x).data
    assert baseline.shape == (1, 1, 16, 16)
    np.testing.assert_array_equal(forward_with_plugs(net, x, PlugSpec()).data, baseline)
    np.testing.assert_array_equal(forward_with_plugs(net, x, PlugSpec({"skip1": None})).data, baseline)


def test_single_and_multi_specs_touch_one_and_four_sites(tiny_net, tiny_config):
    units = {site: DinUnit.identity(site, channels) for site, channels in tiny_config.sites.items()}
    assert len(PlugSpec.single(units)) == 1
    assert len(PlugSpec.multi(units, tiny_config)) == 4
    traces = tiny_net.trace((1, 1, 16, 16), PlugSpec.multi(units, tiny_config))
    assert sum(trace.transfer for trace in traces) == 4


def test_identity_din_plug_equals_instance_norm_plug(tiny_net, tiny_config, rng):
    x = Tensor(rng.uniform(size=(2, 1, 16, 16)))
    for site, channels in tiny_config.sites.items():
        din = PlugSpec({site: DinUnit.identity(site, channels)})
        norm = PlugSpec({site: InstanceNormUnit(site)})
        np.testing.assert_array_equal(tiny_net(x, din).data, tiny_net(x, norm).data)


def test_plugs_do_not_change_encoder_features(tiny_net, tiny_config, rng):
    x = Tensor(rng.uniform(size=(1, 1, 16, 16)))
    before = {name: f.data.copy() for name, f in tiny_net.encode(x).items()}
    plugs = PlugSpec.multi({s: InstanceNormUnit(s) for s in tiny_config.sites}, tiny_config)
    tiny_net(x, plugs)
    for name, f in tiny_net.encode(x).items():
        np.testing.assert_array_equal(f.data, before[name])


def test_plug_validation(tiny_net, tiny_config):
    with pytest.raises(PlugSiteError):
        PlugSpec({"enc0": InstanceNormUnit("enc0")})
    with pytest.raises(PlugSiteError):
        tiny_net(Tensor(np.zeros((1, 1, 16, 16))), PlugSpec({"skip1": DinUnit.identity("skip1", 999)}))
    with pytest.raises(PlugSiteError):
        tiny_net(Tensor(np.zeros((1, 1, 16, 16))), PlugSpec({"skip1": InstanceNormUnit("skip2")}))
    with pytest.raises(PlugSiteError):
        PlugSpec.single({})


def test_frozen_network_survives_optimizer_steps(tiny_net, rng):
    reference = freeze(tiny_net)
    head = DinNet(tiny_net.sites["bottleneck"], rng=rng, init="he", dtype=np.float64)
    optimizer = Adam(tiny_net.parameters() + head.parameters(), lr=1e-2)
    for _ in range(100):
        optimizer.zero_grad()
        features = tiny_net.encode(Tensor(rng.uniform(size=(1, 1, 16, 16))))["bottleneck"]
        weight, bias = head(features)
        backward((weight * weight).sum() + (bias * bias).sum())
        optimizer.step()
    assert assert_frozen(tiny_net, reference)


def test_unfrozen_network_changes_after_a_step(tiny_net, rng):
    reference = snapshot(tiny_net)
    optimizer = Adam(tiny_net.parameters(), lr=1e-2)
    backward((tiny_net(Tensor(rng.uniform(size=(1, 1, 16, 16)))) ** 2).sum())
    optimizer.step()
    assert not assert_frozen(tiny_net, reference)


def test_zero_gradient_adam_step_leaves_parameters(tiny_net):
    reference = snapshot(tiny_net)
    optimizer = Adam(tiny_net.parameters())
    for param in tiny_net.parameters():
        param.grad = np.zeros(param.shape)
    optimizer.step()
    assert assert_frozen(tiny_net, reference)


def test_network_checkpoint_round_trip(tmp_path, tiny_net, tiny_config):
    reference = snapshot(tiny_net)
    save_network(tmp_path / "net", tiny_net, seed=0, meta={"vendor": "A"})
    loaded = load_network(tmp_path / "net", expected=tiny_config, dtype=np.float64)
    assert assert_frozen(loaded, reference)
    assert checkpoint_digest(tmp_path / "net") == checkpoint_digest(tmp_path / "net")


def test_network_checkpoint_refuses_other_config(tmp_path, tiny_net):
    save_network(tmp_path / "net", tiny_net, seed=0)
    with pytest.raises(ConfigMismatchError):
        load_network(tmp_path / "net", expected=UNetConfig(base_width=3))


def test_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointError):
        load_network(tmp_path / "nowhere")


def test_din_nets_round_trip(tmp_path, rng):
    nets = {"bottleneck": DinNet(8, kernel_size=3, rng=rng, init="he"), "skip2": DinNet(4, rng=rng)}
    save_din_nets(tmp_path / "din", nets, seed=1)
    loaded = load_din_nets(tmp_path / "din")
    for site, net in nets.items():
        assert loaded[site].kernel_size == net.kernel_size
        assert snapshot(loaded[site]) == snapshot(net)


def test_units_round_trip(tmp_path, rng):
    units = UnitSet(
        din={"bottleneck": DinUnit("bottleneck", rng.standard_normal((4, 1, 3, 3)), rng.standard_normal(4), "A/train")},
        adain={"skip1": AdaINUnit("skip1", rng.standard_normal(2), rng.uniform(1, 2, size=2), "A/train")},
    )
    save_units(tmp_path / "units", units)
    loaded = load_units(tmp_path / "units")
    assert loaded.din["bottleneck"].digest() == units.din["bottleneck"].digest()
    assert loaded.din["bottleneck"].source == "A/train"
    np.testing.assert_array_equal(loaded.adain["skip1"].sigma, units.adain["skip1"].sigma)
