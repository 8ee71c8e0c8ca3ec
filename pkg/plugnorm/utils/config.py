"""
Experiment configuration.

The config file is a YAML document of flat sections; every section
overrides the defaults of the dataclass it is named after, key by key:

    seed: 1
    dataset:
        n_per_vendor: {A: 100, B: 40, C: 40}
    unet:
        base_width: 8
    vendors:
        B: {gain: 0.6}

Unknown sections and keys are rejected. `dump_config` writes the fully
resolved configuration, which loads back to the same values.
"""
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Type, TypeVar

import yaml
from loguru import logger

from plugnorm.constants import PLUG_SITES
from plugnorm.data.synth import DEFAULT_PROFILES, VendorProfile
from plugnorm.errors import ConfigError, PlugnormIOError
from plugnorm.nn.style import DIN_INITS, DIN_KERNEL_SIZES
from plugnorm.nn.unet import UNetConfig
from plugnorm.training.segmentation import TrainConfig
from plugnorm.utils.helpers import parse_shape

T = TypeVar("T")


@dataclass(frozen=True)
class DatasetConfig:
    root: str = "data"
    n_per_vendor: dict[str, int] = field(default_factory=lambda: {"A": 500, "B": 200, "C": 200})
    splits: dict[str, float] = field(default_factory=lambda: {"train": 0.8, "test": 0.2})
    height: int = 64
    width: int = 64
    style_vendor: str = "A"


@dataclass(frozen=True)
class PlugsConfig:
    kernel_size: int = 1
    init: str = "identity"
    sites: tuple[str, ...] = PLUG_SITES
    style_images: int = 40

    def __post_init__(self) -> None:
        if self.init not in DIN_INITS:
            raise ConfigError(f"plugs.init must be one of {DIN_INITS}, got `{self.init}`.")
        if self.kernel_size not in DIN_KERNEL_SIZES:
            raise ConfigError(f"plugs.kernel_size must be one of {DIN_KERNEL_SIZES}, got {self.kernel_size}.")
        if self.style_images < 1:
            raise ConfigError(f"plugs.style_images must be at least 1, got {self.style_images}.")


@dataclass(frozen=True)
class DinTrainingConfig:
    lr: float = 1e-3
    batch_size: int = 4
    steps: int = 2000
    seed: int = 0
    log_every: int = 100
    content_dir: str | None = None
    content_size: int = 300
    heldout_size: int = 16

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr, batch_size=self.batch_size, steps=self.steps, seed=self.seed, log_every=self.log_every
        )


@dataclass(frozen=True)
class EvaluationConfig:
    vendor: str = "B"
    split: str = "test"
    batch_size: int = 8


@dataclass(frozen=True)
class ProfileConfig:
    base_width: int = 64
    input: str = "400x400"
    time: bool = True
    time_base_width: int = 16
    warmup: int = 3
    reps: int = 10

    @property
    def input_shape(self) -> tuple[int, int, int, int]:
        return (1, 1, *parse_shape(self.input))


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    vendors: dict[str, VendorProfile] = field(default_factory=lambda: dict(DEFAULT_PROFILES))
    unet: UNetConfig = field(default_factory=UNetConfig)
    plugs: PlugsConfig = field(default_factory=PlugsConfig)
    seg_training: TrainConfig = field(default_factory=TrainConfig)
    din_training: DinTrainingConfig = field(default_factory=DinTrainingConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    profile: ProfileConfig = field(default_factory=ProfileConfig)


SECTIONS: dict[str, Type] = {
    "dataset": DatasetConfig,
    "unet": UNetConfig,
    "plugs": PlugsConfig,
    "seg_training": TrainConfig,
    "din_training": DinTrainingConfig,
    "evaluation": EvaluationConfig,
    "profile": ProfileConfig,
}


def _coerce(value: Any, default: Any) -> Any:
    if isinstance(default, tuple) and isinstance(value, list):
        return tuple(value)
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def chain(section: str, base: T, values: Mapping[str, Any] | None) -> T:
    """
    Override the fields of the dataclass instance `base` with `values`.

    Raises `ConfigError` for keys the dataclass does not declare and for values
    its validation rejects.
    """
    if values is None:
        return base
    if not isinstance(values, Mapping):
        raise ConfigError(f"Section `{section}` must be a mapping, got {type(values).__name__}.")
    known = {f.name for f in dataclasses.fields(base) if f.init}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"Unknown key(s) {unknown} in section `{section}` (known: {sorted(known)}).")
    changes = {name: _coerce(value, getattr(base, name)) for name, value in values.items()}
    try:
        return dataclasses.replace(base, **changes)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value in section `{section}`: {e}")


def _vendors(values: Mapping[str, Any] | None) -> dict[str, VendorProfile]:
    vendors = dict(DEFAULT_PROFILES)
    if values is None:
        return vendors
    if not isinstance(values, Mapping):
        raise ConfigError("Section `vendors` must map vendor names to profiles.")
    for name, profile in values.items():
        vendors[str(name)] = chain(f"vendors.{name}", vendors.get(str(name), VendorProfile()), profile)
    return vendors


def resolve(values: Mapping[str, Any] | None, **overrides: Any) -> ExperimentConfig:
    """Build the experiment config from parsed YAML plus command-line overrides (`section__key=value`)."""
    values = {section: dict(body) if isinstance(body, Mapping) else body for section, body in (values or {}).items()}
    for name, value in overrides.items():
        if value is None:
            continue
        section, _, key = name.partition("__")
        if key:
            values.setdefault(section, {})[key] = value
        else:
            values[section] = value

    unknown = sorted(set(values) - set(SECTIONS) - {"seed", "vendors"})
    if unknown:
        raise ConfigError(f"Unknown config section(s) {unknown}.")

    defaults = ExperimentConfig()
    seed = values.get("seed", defaults.seed)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"`seed` must be an integer, got {seed!r}.")
    sections = {name: chain(name, getattr(defaults, name), values.get(name)) for name in SECTIONS}
    config = ExperimentConfig(seed=seed, vendors=_vendors(values.get("vendors")), **sections)

    for site in config.plugs.sites:
        if site not in PLUG_SITES:
            raise ConfigError(f"plugs.sites: `{site}` is not a plug site (expected {PLUG_SITES}).")
    if config.dataset.style_vendor not in config.vendors:
        raise ConfigError(f"dataset.style_vendor `{config.dataset.style_vendor}` has no vendor profile.")
    return config


def load_config(path: Path | str | None = None, **overrides: Any) -> ExperimentConfig:
    values: Any = {}
    if path is not None:
        path = Path(path)
        try:
            logger.info(f"Loading YAML config from {path}.")
            values = yaml.safe_load(path.read_text())
        except FileNotFoundError:
            raise PlugnormIOError(f"No config file at {path}.")
        except yaml.YAMLError as e:
            raise ConfigError(f"{path} is not valid YAML: {e}")
        if values is None:  # File is empty
            values = {}
        if not isinstance(values, Mapping):
            raise ConfigError(f"{path} must hold a mapping of config sections.")
    return resolve(values, **overrides)


def _plain(value: Any) -> Any:
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value) if f.init}
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def config_dict(config: ExperimentConfig) -> dict[str, Any]:
    return _plain(config)


def dump_config(config: ExperimentConfig, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(config_dict(config), sort_keys=False))
    return path
