"""Supervised training of the segmentation network on style-domain samples."""
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from loguru import logger

from plugnorm.core.tensor import Tensor, backward
from plugnorm.errors import ConfigError, NonFiniteError, TrainingDivergedError
from plugnorm.nn.optim import Adam
from plugnorm.nn.unet import UNet
from plugnorm.training.losses import dice_score, segmentation_loss
from plugnorm.utils.helpers import progress


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 4
    steps: int = 300
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    log_every: int = 50

    def __post_init__(self) -> None:
        if self.lr < 0:
            raise ConfigError(f"Learning rate must be non-negative, got {self.lr}.")
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigError(f"steps and batch_size must be at least 1, got {self.steps}, {self.batch_size}.")

    def optimizer(self, params) -> Adam:
        return Adam(params, self.lr, self.beta1, self.beta2, self.eps)


@dataclass(frozen=True)
class LossValue:
    step: int
    loss: float


def batches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Endless index batches: a fresh seeded permutation per epoch, the tail batch kept short."""
    while True:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield order[start : start + batch_size]


def train_segmentation(
    net: UNet, images: np.ndarray, masks: np.ndarray, cfg: TrainConfig
) -> tuple[UNet, list[LossValue]]:
    """
    Minimize soft Dice + BCE on (image, mask) pairs with Adam.

    Batches follow a permutation drawn from `cfg.seed`, so equal seeds give
    identical loss curves. A non-finite loss aborts training.
    """
    if len(images) == 0:
        raise ConfigError("Cannot train the segmentation network on an empty dataset.")
    if images.shape[0] != masks.shape[0]:
        raise ConfigError(f"{images.shape[0]} images but {masks.shape[0]} masks.")

    optimizer = cfg.optimizer(net.trainable_parameters())
    sampler = batches(len(images), cfg.batch_size, np.random.default_rng(cfg.seed))
    curve: list[LossValue] = []
    logger.info(f"Training segmentation on {len(images)} samples for {cfg.steps} steps (lr {cfg.lr})")

    for step in progress(range(cfg.steps), desc="train-seg"):
        index = next(sampler)
        optimizer.zero_grad()
        try:
            logits = net(Tensor(images[index], dtype=net.dtype))
            loss = segmentation_loss(logits, masks[index])
        except NonFiniteError as e:
            raise TrainingDivergedError(f"Segmentation training diverged at step {step}: {e}")
        if not np.isfinite(loss.item()):
            raise TrainingDivergedError(f"Segmentation loss is {loss.item()} at step {step}.")
        backward(loss)
        optimizer.step()

        curve.append(LossValue(step, loss.item()))
        if step % cfg.log_every == 0 or step == cfg.steps - 1:
            logger.debug(
                f"step {step}: loss {loss.item():.5f}, batch dice "
                f"{dice_score(logits.data > 0, masks[index]):.4f}"
            )

    return net, curve
