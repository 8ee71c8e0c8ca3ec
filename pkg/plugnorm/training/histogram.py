from typing import Any

import numpy as np

from plugnorm.core.tensor import Tensor

LEVELS = 256


def _equalize_plane(plane: np.ndarray) -> np.ndarray:
    levels = np.rint(np.clip(plane, 0.0, 1.0) * (LEVELS - 1)).astype(np.int64)
    cdf = np.cumsum(np.bincount(levels.ravel(), minlength=LEVELS))
    cdf_min = cdf[levels.min()]
    if cdf[-1] == cdf_min:
        return plane
    return (cdf[levels] - cdf_min) / (cdf[-1] - cdf_min)


def histogram_equalize(image: Any) -> Any:
    """
    Remap every H x W plane through its 256-bin cumulative histogram.

    Level v maps to (cdf(v) - cdf_min) / (count - cdf_min), so the darkest
    level goes to 0 and the brightest to 1. Constant planes are returned
    unchanged. Tensors in give tensors out.
    """
    values = image.data if isinstance(image, Tensor) else np.asarray(image, dtype=np.float64)
    flat = values.reshape(-1, *values.shape[-2:])
    out = np.stack([_equalize_plane(plane) for plane in flat]).reshape(values.shape)
    if isinstance(image, Tensor):
        return Tensor(out, dtype=image.dtype)
    return out.astype(values.dtype, copy=False)
