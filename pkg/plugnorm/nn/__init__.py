from plugnorm.nn.module import Conv2d, Module, Parameter
from plugnorm.nn.optim import Adam
from plugnorm.nn.style import (
    AdaINUnit,
    DinNet,
    DinUnit,
    InstanceNormUnit,
    adain,
    din_forward,
    din_net_forward,
    extract_adain_stats,
    extract_unit,
)
from plugnorm.nn.unet import (
    PlugSpec,
    UNet,
    UNetConfig,
    assert_frozen,
    build_unet,
    forward_with_plugs,
    freeze,
    snapshot,
)

__all__ = [
    "AdaINUnit",
    "Adam",
    "Conv2d",
    "DinNet",
    "DinUnit",
    "InstanceNormUnit",
    "Module",
    "Parameter",
    "PlugSpec",
    "UNet",
    "UNetConfig",
    "adain",
    "assert_frozen",
    "build_unet",
    "din_forward",
    "din_net_forward",
    "extract_adain_stats",
    "extract_unit",
    "forward_with_plugs",
    "freeze",
    "snapshot",
]
