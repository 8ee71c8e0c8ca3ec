from plugnorm.training.din import DinTrainResult, din_loss, train_din
from plugnorm.training.histogram import histogram_equalize
from plugnorm.training.losses import (
    bce_with_logits,
    dice_score,
    l2_norm,
    loss_bn,
    segmentation_loss,
    soft_dice_loss,
)
from plugnorm.training.segmentation import LossValue, TrainConfig, train_segmentation

__all__ = [
    "DinTrainResult",
    "LossValue",
    "TrainConfig",
    "bce_with_logits",
    "dice_score",
    "din_loss",
    "histogram_equalize",
    "l2_norm",
    "loss_bn",
    "segmentation_loss",
    "soft_dice_loss",
    "train_din",
    "train_segmentation",
]
