import argparse
import dataclasses

from loguru import logger

from plugnorm.constants import THREADS
from plugnorm.data.dataset import generate_dataset, manifest_digest
from plugnorm.errors import ConfigError
from plugnorm.utils.config import ExperimentConfig


def configure(args: argparse.Namespace, config: ExperimentConfig) -> ExperimentConfig:
    dataset = dataclasses.replace(config.dataset, root=str(args.out))
    if args.n_per_vendor is not None:
        if args.n_per_vendor < 0:
            raise ConfigError(f"--n-per-vendor must be non-negative, got {args.n_per_vendor}.")
        dataset = dataclasses.replace(dataset, n_per_vendor={vendor: args.n_per_vendor for vendor in config.vendors})
    return dataclasses.replace(config, dataset=dataset)


def gen_data(ctx) -> None:
    """Render every vendor's samples and print the manifest digest."""
    config = ctx.config
    counts = {vendor: config.dataset.n_per_vendor.get(vendor, 0) for vendor in config.vendors}
    manifest = generate_dataset(
        ctx.out,
        config.vendors,
        counts,
        config.dataset.splits,
        seed=config.seed,
        height=config.dataset.height,
        width=config.dataset.width,
        force=True,
        workers=THREADS,
    )
    digest = manifest_digest(ctx.out)
    logger.info(f"Wrote {len(manifest)} samples ({counts}); manifest digest {digest}")
    print(digest)


def setup(cli) -> None:
    parser = cli.add_command(
        "gen-data",
        gen_data,
        help="Generate the synthetic multi-vendor dataset.",
        default_out="data",
        configure=configure,
        fresh_output=True,
    )
    parser.add_argument("--n-per-vendor", type=int, help="Samples per vendor (overrides dataset.n_per_vendor).")
