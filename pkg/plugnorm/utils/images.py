import math
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from plugnorm.data.io import save_pgm, to_uint8
from plugnorm.errors import ShapeError


def min_max(plane: np.ndarray) -> np.ndarray:
    """Stretch a feature plane to [0, 1]; constant planes map to 0."""
    plane = np.asarray(plane, dtype=np.float64)
    low, high = plane.min(), plane.max()
    if high - low < 1e-12:
        return np.zeros_like(plane)
    return (plane - low) / (high - low)


def save_heatmap(path: Path | str, plane: Any) -> Path:
    """Write one H x W feature plane, min-max normalized, as PGM."""
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise ShapeError(f"Heatmaps are drawn from H x W planes, got {plane.shape}.")
    return save_pgm(path, min_max(plane))


def channel_grid(features: Any, columns: int | None = None, pad: int = 1) -> Image.Image:
    """
    Tile the normalized channels of C x H x W features row by row into one image.

    Channels are normalized independently; padding is black.
    """
    features = np.asarray(features)
    if features.ndim != 3:
        raise ShapeError(f"channel_grid expects C x H x W features, got {features.shape}.")
    channels, height, width = features.shape
    columns = columns or math.ceil(math.sqrt(channels))
    rows = math.ceil(channels / columns)

    grid = Image.new("L", (columns * (width + pad) - pad, rows * (height + pad) - pad))
    for index in range(channels):
        tile = Image.fromarray(to_uint8(min_max(features[index])), mode="L")
        row, column = divmod(index, columns)
        grid.paste(tile, (column * (width + pad), row * (height + pad)))
    return grid
