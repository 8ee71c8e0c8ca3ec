"""Assembly of the compared segmentation methods around one trained network."""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from plugnorm.constants import METHODS
from plugnorm.core.tensor import Tensor, no_grad
from plugnorm.errors import ConfigError
from plugnorm.nn.checkpoint import UnitSet
from plugnorm.nn.style import AdaINUnit, DinUnit
from plugnorm.nn.unet import PlugSpec, UNet
from plugnorm.training.histogram import histogram_equalize

Preprocess = Callable[[np.ndarray], np.ndarray]


@dataclass
class Method:
    """A segmentation network plus the style units plugged into it and an optional input transform."""

    name: str
    net: UNet
    plugs: PlugSpec = field(default_factory=PlugSpec)
    preprocess: Preprocess | None = None

    def predict_logits(self, images: np.ndarray, batch_size: int = 8) -> np.ndarray:
        if self.preprocess is not None:
            images = self.preprocess(images)
        outputs = []
        with no_grad():
            for start in range(0, len(images), batch_size):
                batch = Tensor(images[start : start + batch_size], dtype=self.net.dtype)
                outputs.append(self.net(batch, self.plugs).data)
        return np.concatenate(outputs) if outputs else np.zeros((0, *images.shape[1:]))

    def predict_masks(self, images: np.ndarray, batch_size: int = 8) -> np.ndarray:
        """Foreground where the sigmoid probability exceeds 0.5."""
        return (self.predict_logits(images, batch_size) > 0).astype(np.uint8)


def build_plugs(name: str, net: UNet, units: UnitSet | None) -> PlugSpec:
    if name in ("baseline", "histequal"):
        return PlugSpec()
    if units is None:
        raise ConfigError(f"Method `{name}` needs extracted units; run `plug` first.")
    pool = units.adain if "adain" in name else units.din
    plugs = PlugSpec.single(pool) if name.startswith("s-") else PlugSpec.multi(pool, net.config)
    plugs.validate(net.config)
    return plugs


def build_method(name: str, net: UNet, units: UnitSet | None = None) -> Method:
    """One of `METHODS`: the unplugged network, histogram equalization, or S-/M- AdaIN or DIN plugs."""
    if name not in METHODS:
        raise ConfigError(f"Unknown method `{name}` (expected one of {METHODS}).")
    preprocess = histogram_equalize if name == "histequal" else None
    return Method(name, net, build_plugs(name, net, units), preprocess)


def shape_units(net: UNet, kernel_size: int = 1) -> UnitSet:
    """
    Identity DIN units and unit-scale AdaIN units at every site of `net`.

    Complexity accounting depends only on unit shapes, so these stand in for
    extracted units on networks of any width.
    """
    units = UnitSet()
    for site, channels in net.sites.items():
        units.din[site] = DinUnit.identity(site, channels, kernel_size, dtype=net.dtype)
        units.adain[site] = AdaINUnit(site, np.zeros(channels), np.ones(channels), source="identity")
    return units
