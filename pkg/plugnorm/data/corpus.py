"""
Content corpora for DIN-net training.

Content images only need rich, varied feature statistics. The synthetic
corpus cycles multi-octave smooth noise, oriented stripes and checkerboards;
`load_content_dir` reads any directory of images Pillow can decode.
"""
from pathlib import Path

import numpy as np
from loguru import logger
from scipy.ndimage import gaussian_filter

from plugnorm.data.io import load_grayscale
from plugnorm.errors import ConfigError, PlugnormIOError


def _normalize(values: np.ndarray) -> np.ndarray:
    low, high = values.min(), values.max()
    if high - low < 1e-12:
        return np.full_like(values, 0.5)
    return (values - low) / (high - low)


def _octave_noise(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    image = np.zeros((height, width))
    amplitude = 1.0
    for sigma in (8.0, 4.0, 2.0, 1.0):
        image += amplitude * gaussian_filter(rng.standard_normal((height, width)), sigma)
        amplitude *= 0.5
    return _normalize(image)


def _stripes(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    theta = rng.uniform(0, np.pi)
    period = rng.uniform(3.0, max(4.0, min(height, width) / 3))
    phase = rng.uniform(0, 2 * np.pi)
    wave = np.sin(2 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / period + phase)
    return _normalize(wave + 0.2 * rng.standard_normal((height, width)))


def _checkerboard(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    cell = int(rng.integers(2, max(3, min(height, width) // 4)))
    yy, xx = np.mgrid[0:height, 0:width]
    low, high = np.sort(rng.uniform(0, 1, size=2))
    board = np.where((yy // cell + xx // cell) % 2 == 0, low, high)
    return np.clip(board + 0.05 * rng.standard_normal((height, width)), 0, 1)


GENERATORS = (_octave_noise, _stripes, _checkerboard)


def synthetic_texture_corpus(n: int, height: int, width: int, seed: int = 0) -> np.ndarray:
    """`n` texture images (N x 1 x H x W, values in [0, 1]), kinds cycling in a fixed order."""
    if n < 0:
        raise ConfigError(f"Corpus size must be non-negative, got {n}.")
    rng = np.random.default_rng(seed)
    images = np.empty((n, 1, height, width))
    for index in range(n):
        images[index, 0] = GENERATORS[index % len(GENERATORS)](rng, height, width)
    return images


def load_content_dir(path: Path | str, height: int, width: int, limit: int | None = None) -> np.ndarray:
    """Every decodable image below `path`, converted to grayscale and resized, in name order."""
    path = Path(path)
    if not path.is_dir():
        raise PlugnormIOError(f"No content directory at {path}.")
    files = sorted(p for p in path.rglob("*") if p.is_file())
    if limit is not None:
        files = files[:limit]
    if not files:
        raise PlugnormIOError(f"Content directory {path} holds no images.")
    logger.info(f"Loading {len(files)} content images from {path}")
    return np.stack([load_grayscale(file, height, width) for file in files])
