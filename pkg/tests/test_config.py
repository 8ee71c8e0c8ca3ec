import pytest

from plugnorm.data.synth import DEFAULT_PROFILES
from plugnorm.errors import ConfigError, PlugnormIOError
from plugnorm.utils.config import ExperimentConfig, chain, dump_config, load_config, resolve


def test_defaults():
    config = load_config()
    assert config == ExperimentConfig()
    assert config.unet.base_width == 16 and config.unet.depth == 4
    assert config.dataset.n_per_vendor == {"A": 500, "B": 200, "C": 200}
    assert config.plugs.kernel_size == 1
    assert config.profile.input_shape == (1, 1, 400, 400)
    assert config.vendors == DEFAULT_PROFILES


def test_sections_override_key_by_key(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(
        "seed: 4\n"
        "unet:\n  base_width: 8\n"
        "seg_training:\n  lr: 1\n  steps: 20\n"
        "vendors:\n  B: {gain: 0.5}\n  D: {gamma: 2.0, seed: 3}\n"
        "plugs:\n  sites: [bottleneck, skip3]\n"
    )
    config = load_config(path)
    assert config.seed == 4
    assert config.unet.base_width == 8 and config.unet.depth == 4
    assert config.seg_training.lr == 1.0 and isinstance(config.seg_training.lr, float)
    assert config.seg_training.batch_size == 4
    assert config.vendors["B"].gain == 0.5
    assert config.vendors["B"].gamma == DEFAULT_PROFILES["B"].gamma
    assert config.vendors["D"].gamma == 2.0 and config.vendors["D"].gain == 1.0
    assert config.plugs.sites == ("bottleneck", "skip3")


def test_command_line_overrides_win(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("dataset:\n  root: from-file\n")
    config = load_config(path, dataset__root="from-cli", seed=9, evaluation__vendor=None)
    assert config.dataset.root == "from-cli"
    assert config.seed == 9
    assert config.evaluation.vendor == "B"


@pytest.mark.parametrize(
    "values",
    [
        {"unet": {"width": 3}},
        {"training": {}},
        {"unet": {"base_width": 0}},
        {"seg_training": {"steps": 0}},
        {"plugs": {"sites": ["enc0"]}},
        {"dataset": {"style_vendor": "Z"}},
        {"seed": "one"},
        {"unet": [1, 2]},
        {"vendors": {"B": {"gain": -1.0}}},
        {"plugs": {"init": "identty"}},
        {"plugs": {"kernel_size": 2}},
        {"plugs": {"kernel_size": 5}},
        {"plugs": {"style_images": 0}},
    ],
)
def test_invalid_configs(values):
    with pytest.raises(ConfigError):
        resolve(values)


def test_chain_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        chain("vendors.A", DEFAULT_PROFILES["A"], {"contrast": 2})


def test_malformed_files(tmp_path):
    with pytest.raises(PlugnormIOError):
        load_config(tmp_path / "missing.yaml")
    (tmp_path / "bad.yaml").write_text("unet: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "list.yaml")
    (tmp_path / "empty.yaml").write_text("")
    assert load_config(tmp_path / "empty.yaml") == ExperimentConfig()


def test_resolved_config_loads_back(tmp_path):
    config = resolve({"seed": 2, "unet": {"base_width": 4}, "vendors": {"B": {"blur_sigma": 2.0}}})
    path = dump_config(config, tmp_path / "resolved_config.yaml")
    assert load_config(path) == config
