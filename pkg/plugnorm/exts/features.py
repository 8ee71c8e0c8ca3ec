from pathlib import Path

import numpy as np
from loguru import logger

from plugnorm.constants import PLUG_SITES
from plugnorm.core import ptns
from plugnorm.core.tensor import Tensor, no_grad
from plugnorm.data.dataset import load_split
from plugnorm.data.io import load_image_file, save_pgm
from plugnorm.errors import ConfigError, PlugSiteError
from plugnorm.exts._common import dataset_root, require_dir
from plugnorm.nn.checkpoint import load_network, load_units
from plugnorm.utils.images import channel_grid, save_heatmap


def _input_image(ctx, dtype) -> Tensor:
    args, config = ctx.args, ctx.config
    if args.image is not None:
        return load_image_file(args.image, dtype)
    root = dataset_root(args.data, config)
    vendor = config.evaluation.vendor
    entries, images, _ = load_split(root, vendor, config.evaluation.split)
    if not entries:
        raise ConfigError(f"No {vendor}/{config.evaluation.split} samples at {root}; pass --image.")
    ids = [entry.id for entry in entries]
    if args.sample is not None and args.sample not in ids:
        raise ConfigError(f"No sample `{args.sample}` in {vendor}/{config.evaluation.split}.")
    index = ids.index(args.sample) if args.sample is not None else 0
    logger.info(f"Dumping features of sample {entries[index].id}")
    return Tensor(images[index], dtype=dtype)


def _dump(directory: Path, features: np.ndarray) -> None:
    for channel, plane in enumerate(features):
        save_heatmap(directory / f"ch{channel:03d}.pgm", plane)
    channel_grid(features).save(directory / "grid.pgm", format="PPM")
    ptns.save(directory / "features.ptns", features)


def dump_features(ctx) -> None:
    """Per-channel heatmaps of one site's features before and after its plugged unit."""
    args, site = ctx.args, ctx.args.site
    net = load_network(require_dir(args.net, "segmentation checkpoint"), expected=ctx.config.unet)
    net.freeze()
    units = load_units(require_dir(args.units, "unit container"))
    pool = units.din if args.unit == "din" else units.adain
    if site not in pool:
        raise PlugSiteError(f"The unit container has no {args.unit} unit at `{site}`.")

    image = _input_image(ctx, net.dtype)
    x = image.reshape(1, *image.shape) if image.ndim == 3 else image
    with no_grad():
        before = net.encode(x)[site]
        after = pool[site](before)

    save_pgm(ctx.out / "input.pgm", x.data[0])
    _dump(ctx.out / "before", before.data[0])
    _dump(ctx.out / "after", after.data[0])
    logger.info(f"Wrote {before.shape[1]} channel heatmaps of `{site}` before and after {args.unit} to {ctx.out}")


def setup(cli) -> None:
    parser = cli.add_command(
        "dump-features",
        dump_features,
        help="Heatmaps of a site's feature maps before and after the plugged unit.",
        default_out="runs/features",
    )
    parser.add_argument("--net", type=Path, required=True, help="Segmentation checkpoint directory.")
    parser.add_argument("--units", type=Path, required=True, help="Unit container from `plug`.")
    parser.add_argument("--site", default="bottleneck", choices=PLUG_SITES)
    parser.add_argument("--unit", default="din", choices=["din", "adain"])
    parser.add_argument("--image", type=Path, help="PTNS or PGM image (default: a test sample of evaluation.vendor).")
    parser.add_argument("--data", type=Path, help="Dataset root (default dataset.root).")
    parser.add_argument("--sample", help="Sample id within the evaluation split.")
