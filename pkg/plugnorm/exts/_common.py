"""Helpers shared by the command modules."""
from pathlib import Path
from typing import Iterable

import numpy as np
from loguru import logger

from plugnorm.data.dataset import load_split
from plugnorm.errors import CheckpointError, ConfigError
from plugnorm.training.segmentation import LossValue
from plugnorm.utils.config import ExperimentConfig
from plugnorm.utils.helpers import write_csv


def dataset_root(path: Path | None, config: ExperimentConfig) -> Path:
    return Path(path) if path is not None else Path(config.dataset.root)


def require_dir(path: Path | None, what: str) -> Path:
    if path is None:
        raise CheckpointError(f"No {what} given.")
    path = Path(path)
    if not path.is_dir():
        raise CheckpointError(f"No {what} at {path}.")
    return path


def style_split(root: Path, config: ExperimentConfig, split: str, limit: int | None = None) -> np.ndarray:
    """Images of the style vendor's `split`, the first `limit` of them when given."""
    vendor = config.dataset.style_vendor
    entries, images, _ = load_split(root, vendor, split)
    if not entries:
        raise ConfigError(f"The dataset at {root} has no {vendor}/{split} samples.")
    if limit is not None:
        images = images[:limit]
    logger.debug(f"Using {len(images)} {vendor}/{split} style images")
    return images


def write_curve(path: Path, curve: Iterable[LossValue], column: str = "loss") -> Path:
    return write_csv(path, ["step", column], ([value.step, repr(value.loss)] for value in curve))
