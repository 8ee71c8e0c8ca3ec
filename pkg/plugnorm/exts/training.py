"""`train-seg` and `train-din`."""
from pathlib import Path

import numpy as np
from loguru import logger

from plugnorm.constants import FileNames
from plugnorm.data.corpus import load_content_dir, synthetic_texture_corpus
from plugnorm.data.dataset import load_split
from plugnorm.errors import ConfigError, FrozenEncoderViolation
from plugnorm.exts._common import dataset_root, require_dir, style_split, write_curve
from plugnorm.nn.checkpoint import checkpoint_digest, load_network, save_din_nets, save_network
from plugnorm.nn.style import DinNet
from plugnorm.nn.unet import assert_frozen, build_unet, freeze
from plugnorm.pipeline import build_method
from plugnorm.training.din import train_din
from plugnorm.training.losses import dice_score
from plugnorm.training.segmentation import train_segmentation

NET_DIR = "net"
DIN_DIR = "din_nets"


def train_seg(ctx) -> None:
    """Train the U-Net on the style vendor's training split and report held-out Dice."""
    config, root = ctx.config, dataset_root(ctx.args.data, ctx.config)
    vendor = config.dataset.style_vendor
    entries, images, masks = load_split(root, vendor, "train")
    if not entries:
        raise ConfigError(f"The dataset at {root} has no {vendor}/train samples.")

    net = build_unet(config.unet, config.seed)
    net, curve = train_segmentation(net, images, masks, config.seg_training)
    write_curve(ctx.out / FileNames.loss_curve, curve)

    meta = {"vendor": vendor, "train_samples": len(entries), "final_loss": curve[-1].loss}
    test_entries, test_images, test_masks = load_split(root, vendor, "test")
    if test_entries:
        score = dice_score(build_method("baseline", net).predict_masks(test_images), test_masks)
        meta["heldout_dice"] = score
        logger.info(f"Held-out {vendor}/test Dice: {score:.4f} on {len(test_entries)} samples")
    path = save_network(ctx.out / NET_DIR, net, config.seed, meta)
    logger.info(f"Saved segmentation network to {path} (digest {checkpoint_digest(path)})")


def _content(config, seed: int) -> tuple[np.ndarray, np.ndarray]:
    training = config.din_training
    height, width = config.dataset.height, config.dataset.width
    if training.content_dir is None:
        content = synthetic_texture_corpus(training.content_size, height, width, seed)
        heldout = synthetic_texture_corpus(training.heldout_size, height, width, seed + 1)
        return content, heldout
    images = load_content_dir(training.content_dir, height, width, training.content_size + training.heldout_size)
    if len(images) <= training.heldout_size:
        raise ConfigError(f"{training.content_dir} has too few images for a held-out set of {training.heldout_size}.")
    return images[: -training.heldout_size], images[-training.heldout_size :]


def train_din_nets(ctx) -> None:
    """Train one DIN-net per plug site against the frozen segmentation encoder."""
    config, root = ctx.config, dataset_root(ctx.args.data, ctx.config)
    net_dir = require_dir(ctx.args.net, "segmentation checkpoint")
    digest_before = checkpoint_digest(net_dir)
    logger.info(f"Encoder checkpoint digest before training: {digest_before}")

    net = load_network(net_dir, expected=config.unet)
    reference = freeze(net)
    sites = [site for site in config.plugs.sites if site in net.sites]
    if not sites:
        raise ConfigError(f"None of plugs.sites {list(config.plugs.sites)} exists in the network.")
    nets = {
        site: DinNet(
            net.sites[site],
            config.plugs.kernel_size,
            np.random.default_rng([config.seed, index]),
            config.plugs.init,
            dtype=net.dtype,
        )
        for index, site in enumerate(sites)
    }

    content, heldout_content = _content(config, config.seed)
    style = style_split(root, config, "train")
    try:
        heldout_style = style_split(root, config, "test", config.din_training.heldout_size)
    except ConfigError:
        heldout_style = style[: config.din_training.heldout_size]

    result = train_din(
        net, nets, content, style, config.din_training.train_config(), (heldout_content, heldout_style)
    )
    write_curve(ctx.out / FileNames.loss_curve, result.curve, "loss_bn")
    write_curve(ctx.out / FileNames.heldout_curve, result.heldout, "heldout_loss_bn")
    save_din_nets(
        ctx.out / DIN_DIR,
        result.nets,
        config.seed,
        {"sites": sites, "encoder_digest": digest_before, "heldout_final": result.heldout[-1].loss},
    )

    digest_after = checkpoint_digest(net_dir)
    logger.info(f"Encoder checkpoint digest after training: {digest_after}")
    if digest_after != digest_before or not assert_frozen(net, reference):
        raise FrozenEncoderViolation(f"The encoder checkpoint at {net_dir} changed during DIN training.")


def setup(cli) -> None:
    parser = cli.add_command(
        "train-seg", train_seg, help="Train the segmentation U-Net on the style vendor.", default_out="runs/seg"
    )
    parser.add_argument("--data", type=Path, help="Dataset root (default dataset.root).")

    parser = cli.add_command(
        "train-din", train_din_nets, help="Train DIN-nets against the frozen encoder.", default_out="runs/din"
    )
    parser.add_argument("--data", type=Path, help="Dataset root (default dataset.root).")
    parser.add_argument("--net", type=Path, required=True, help="Segmentation checkpoint directory.")
