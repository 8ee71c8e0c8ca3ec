from pathlib import Path

from loguru import logger

from plugnorm.exts._common import dataset_root, require_dir, style_split
from plugnorm.nn.checkpoint import UnitSet, load_din_nets, load_network, save_units
from plugnorm.nn.style import extract_adain_stats, extract_unit

UNITS_DIR = "units"


def plug(ctx) -> None:
    """Freeze per-site DIN units and AdaIN statistics from the style vendor's images."""
    config, root = ctx.config, dataset_root(ctx.args.data, ctx.config)
    net = load_network(require_dir(ctx.args.net, "segmentation checkpoint"), expected=config.unet)
    net.freeze()
    din_nets = load_din_nets(require_dir(ctx.args.din, "DIN-net checkpoint"), dtype=net.dtype)

    style = style_split(root, config, "train", config.plugs.style_images)
    source = f"{config.dataset.style_vendor}/train"
    units = UnitSet()
    for site, din_net in din_nets.items():
        units.din[site] = extract_unit(din_net, net, style, site, source)
        logger.info(f"DIN unit at {site}: {units.din[site].num_params} parameters, digest {units.din[site].digest()[:12]}")
    for site in net.sites:
        if site in config.plugs.sites:
            units.adain[site] = extract_adain_stats(net, style, site, source)

    path = save_units(ctx.out / UNITS_DIR, units, {"style_images": len(style), "seed": config.seed})
    logger.info(f"Saved {len(units.din)} DIN and {len(units.adain)} AdaIN units to {path}")


def setup(cli) -> None:
    parser = cli.add_command(
        "plug", plug, help="Extract plug-and-play units from style images.", default_out="runs/plug"
    )
    parser.add_argument("--data", type=Path, help="Dataset root (default dataset.root).")
    parser.add_argument("--net", type=Path, required=True, help="Segmentation checkpoint directory.")
    parser.add_argument("--din", type=Path, required=True, help="DIN-net checkpoint directory.")
