"""
DIN-net training against a frozen segmentation encoder.

Each step draws a content batch and a style batch, encodes both with the
frozen encoder, predicts DIN parameters from the style features of every
plug site and minimizes the summed statistics matching loss between the
stylized content features and the style features. Nets of different sites
share no parameters, so joint training equals training them one by one.
"""
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from loguru import logger

from plugnorm.core.tensor import Tensor, backward, no_grad
from plugnorm.errors import ConfigError, FrozenEncoderViolation, NonFiniteError, TrainingDivergedError
from plugnorm.nn.style import DinNet, dynamic_instance_norm
from plugnorm.nn.unet import UNet, assert_frozen, snapshot
from plugnorm.training.losses import loss_bn
from plugnorm.training.segmentation import LossValue, TrainConfig, batches
from plugnorm.utils.helpers import progress


@dataclass(frozen=True)
class DinTrainResult:
    nets: dict[str, DinNet]
    curve: list[LossValue]
    heldout: list[LossValue]


def _encode(encoder: UNet, images: np.ndarray, sites: list[str]) -> dict[str, Tensor]:
    with no_grad():
        features = encoder.encode(Tensor(images, dtype=encoder.dtype))
    return {site: features[site] for site in sites}


def din_loss(
    nets: Mapping[str, DinNet], content: Mapping[str, Tensor], style: Mapping[str, Tensor]
) -> Tensor:
    """Sum over sites of loss_bn(DIN(content features; params from style features), style features)."""
    total = None
    for site, net in nets.items():
        fc = content[site].astype(net.dtype)
        fs = style[site].astype(net.dtype)
        weight, bias = net(fs)
        # One unit per style batch: the predicted parameters are averaged over style images.
        weight = weight.mean(axis=0, keepdims=True)
        bias = bias.mean(axis=0, keepdims=True)
        term = loss_bn(dynamic_instance_norm(fc, weight, bias), fs)
        total = term if total is None else total + term
    return total


def _check_frozen(encoder: UNet, reference: dict[str, bytes], when: str) -> None:
    if not encoder.frozen or not assert_frozen(encoder, reference):
        raise FrozenEncoderViolation(f"The segmentation encoder changed during DIN training ({when}).")


def train_din(
    encoder: UNet,
    din_nets: Mapping[str, DinNet],
    content: np.ndarray,
    style: np.ndarray,
    cfg: TrainConfig,
    heldout: tuple[np.ndarray, np.ndarray] | None = None,
) -> DinTrainResult:
    """
    Train one DIN-net per site in `din_nets` jointly with Adam.

    The encoder must be frozen beforehand; its parameter bytes are compared
    with a snapshot at every epoch boundary and after the last step.
    `heldout` is an optional (content, style) pair whose loss is logged every
    `cfg.log_every` steps.
    """
    if not din_nets:
        raise ConfigError("No plug sites to train DIN-nets for.")
    if len(content) == 0 or len(style) == 0:
        raise ConfigError("DIN training needs at least one content and one style image.")
    if not encoder.frozen:
        raise FrozenEncoderViolation("The segmentation encoder must be frozen before DIN training.")

    reference = snapshot(encoder)
    sites = list(din_nets)
    params = [param for net in din_nets.values() for param in net.trainable_parameters()]
    optimizer = cfg.optimizer(params)
    rng = np.random.default_rng(cfg.seed)
    content_batches = batches(len(content), cfg.batch_size, rng)
    style_batches = batches(len(style), cfg.batch_size, rng)
    epoch = max(1, len(content) // cfg.batch_size)

    heldout_features = None
    if heldout is not None:
        heldout_features = (_encode(encoder, heldout[0], sites), _encode(encoder, heldout[1], sites))

    def heldout_loss() -> float:
        with no_grad():
            return din_loss(din_nets, *heldout_features).item()

    curve: list[LossValue] = []
    heldout_curve: list[LossValue] = []
    logger.info(
        f"Training DIN-nets at {sites} on {len(content)} content / {len(style)} style images "
        f"for {cfg.steps} steps (lr {cfg.lr})"
    )

    for step in progress(range(cfg.steps), desc="train-din"):
        if heldout_features is not None and step % cfg.log_every == 0:
            heldout_curve.append(LossValue(step, heldout_loss()))

        fc = _encode(encoder, content[next(content_batches)], sites)
        fs = _encode(encoder, style[next(style_batches)], sites)
        optimizer.zero_grad()
        try:
            loss = din_loss(din_nets, fc, fs)
        except NonFiniteError as e:
            raise TrainingDivergedError(f"DIN training diverged at step {step}: {e}")
        if loss.requires_grad:
            backward(loss)
            optimizer.step()
        curve.append(LossValue(step, loss.item()))

        if step % cfg.log_every == 0:
            logger.debug(f"step {step}: L_BN {loss.item():.6f}")
        if (step + 1) % epoch == 0:
            _check_frozen(encoder, reference, f"after step {step}")

    _check_frozen(encoder, reference, "end of training")
    if heldout_features is not None:
        heldout_curve.append(LossValue(cfg.steps, heldout_loss()))
        first, last = heldout_curve[0].loss, heldout_curve[-1].loss
        reduction = 1.0 - last / first if first > 0 else 0.0
        logger.info(f"Held-out L_BN {first:.6f} -> {last:.6f} ({reduction:.1%} reduction)")

    return DinTrainResult(dict(din_nets), curve, heldout_curve)
