from pathlib import Path

from loguru import logger

from plugnorm.constants import METHODS, FileNames
from plugnorm.data.dataset import Manifest, load_split
from plugnorm.errors import ConfigError
from plugnorm.exts._common import dataset_root, require_dir
from plugnorm.metrics import aggregate, evaluate_masks, write_report
from plugnorm.nn.checkpoint import load_network, load_units
from plugnorm.pipeline import build_method


def evaluate(ctx) -> None:
    """Segment a test split with each selected method and write per-sample and mean metrics."""
    config, args = ctx.config, ctx.args
    root = dataset_root(args.data, config)
    net = load_network(require_dir(args.net, "segmentation checkpoint"), expected=config.unet)
    net.freeze()
    units = load_units(require_dir(args.units, "unit container")) if args.units is not None else None

    vendor = args.vendor or config.evaluation.vendor
    vendors = Manifest.read(root).vendors if vendor == "all" else [vendor]
    methods = METHODS if args.method == "all" else [args.method]
    pipelines = [build_method(name, net, units) for name in methods]

    rows = []
    for vendor in vendors:
        entries, images, masks = load_split(root, vendor, config.evaluation.split)
        if not entries:
            raise ConfigError(f"No {vendor}/{config.evaluation.split} samples at {root}.")
        ids = [entry.id for entry in entries]
        for method in pipelines:
            predictions = method.predict_masks(images, config.evaluation.batch_size)
            sample_rows = evaluate_masks(ids, vendor, method.name, predictions, masks)
            mean = aggregate(sample_rows, vendor, method.name)
            logger.info(
                f"{vendor} / {method.name}: Dice {mean.report.dice:.4f}, HDB {mean.report.hdb:.3f} px "
                f"over {len(sample_rows)} samples"
            )
            rows += [*sample_rows, mean]

    path = write_report(ctx.out / FileNames.report, rows)
    logger.info(f"Wrote evaluation report to {path}")


def setup(cli) -> None:
    parser = cli.add_command("eval", evaluate, help="Evaluate segmentation methods.", default_out="runs/eval")
    parser.add_argument("--data", type=Path, help="Dataset root (default dataset.root).")
    parser.add_argument("--net", type=Path, required=True, help="Segmentation checkpoint directory.")
    parser.add_argument("--units", type=Path, help="Unit container from `plug` (needed by AdaIN/DIN methods).")
    parser.add_argument("--method", default="baseline", choices=[*METHODS, "all"])
    parser.add_argument("--vendor", help="Vendor to evaluate, or `all` (default evaluation.vendor).")
