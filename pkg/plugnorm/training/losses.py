from typing import Any

import numpy as np

from plugnorm.constants import EPS
from plugnorm.core.tensor import Tensor, record
from plugnorm.errors import ShapeError
from plugnorm.nn import functional as F


def l2_norm(x: Tensor) -> Tensor:
    """Euclidean norm of all entries; the gradient at the origin is taken as zero."""
    norm = np.sqrt(np.sum(x.data.astype(np.float64) ** 2))

    def backward(grad: np.ndarray) -> tuple:
        if norm == 0:
            return (np.zeros(x.shape, dtype=x.dtype),)
        return ((grad * x.data / norm).astype(x.dtype),)

    return record("l2_norm", np.asarray(norm, dtype=x.dtype), (x,), backward)


def loss_bn(stylized: Tensor, style: Tensor, eps: float = EPS) -> Tensor:
    """
    Statistics matching loss between stylized and style features.

    ||mu(stylized) - mu(style)||_2 + ||sigma(stylized) - sigma(style)||_2 over
    channel statistics pooled across batch and space. Spatial sizes and batch
    sizes may differ; channel counts must agree.
    """
    if stylized.ndim != 4 or style.ndim != 4 or stylized.shape[1] != style.shape[1]:
        raise ShapeError(f"loss_bn needs matching channel counts, got {stylized.shape} and {style.shape}.")
    target = F.channel_stats(style.detach().astype(stylized.dtype), eps)
    stats = F.channel_stats(stylized, eps)
    return l2_norm(stats.mu - target.mu) + l2_norm(stats.sigma - target.sigma)


def bce_with_logits(logits: Tensor, targets: Any) -> Tensor:
    """Mean binary cross-entropy, computed as relu(x) - x * y + log(1 + exp(-|x|))."""
    y = Tensor(targets, dtype=logits.dtype)
    if y.shape != logits.shape:
        raise ShapeError(f"Targets {y.shape} do not match logits {logits.shape}.")
    return (logits.relu() - logits * y + (1.0 + (-logits.abs()).exp()).log()).mean()


def soft_dice_loss(logits: Tensor, targets: Any, smooth: float = 1.0) -> Tensor:
    """1 - mean per-sample soft Dice of sigmoid probabilities."""
    y = Tensor(targets, dtype=logits.dtype)
    if y.shape != logits.shape:
        raise ShapeError(f"Targets {y.shape} do not match logits {logits.shape}.")
    probs = logits.sigmoid()
    axes = tuple(range(1, logits.ndim))
    overlap = (probs * y).sum(axis=axes)
    total = probs.sum(axis=axes) + y.sum(axis=axes)
    return 1.0 - ((2.0 * overlap + smooth) / (total + smooth)).mean()


def segmentation_loss(logits: Tensor, targets: Any) -> Tensor:
    """Soft Dice plus binary cross-entropy, equally weighted."""
    return soft_dice_loss(logits, targets) + bce_with_logits(logits, targets)


def dice_score(predictions: Any, targets: Any) -> float:
    """Mean hard Dice over samples; a sample with both masks empty scores 1."""
    pred = np.asarray(predictions) > 0.5
    gt = np.asarray(targets) > 0.5
    if pred.shape != gt.shape:
        raise ShapeError(f"Predictions {pred.shape} do not match targets {gt.shape}.")
    axes = tuple(range(1, pred.ndim))
    overlap = (pred & gt).sum(axis=axes)
    total = pred.sum(axis=axes) + gt.sum(axis=axes)
    scores = np.where(total == 0, 1.0, 2.0 * overlap / np.maximum(total, 1))
    return float(scores.mean())
