from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger
from PIL import Image, UnidentifiedImageError

from plugnorm.core import ptns
from plugnorm.core.tensor import Tensor
from plugnorm.errors import ImageFormatError

PGM_MAGIC = b"P5"


def to_uint8(image: Any) -> np.ndarray:
    """Map values in [0, 1] to 8-bit levels, squeezing a leading channel axis."""
    values = np.asarray(image, dtype=np.float64)
    if values.ndim == 3 and values.shape[0] == 1:
        values = values[0]
    if values.ndim != 2:
        raise ImageFormatError(f"Grayscale images are H x W or 1 x H x W, got {values.shape}.")
    return np.rint(np.clip(values, 0.0, 1.0) * 255).astype(np.uint8)


def save_pgm(path: Path | str, image: Any) -> Path:
    """Write an image in [0, 1] as binary 8-bit PGM."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(image), mode="L").save(path, format="PPM")
    return path


def read_pgm(path: Path | str, dtype: Any = np.float32) -> np.ndarray:
    """Read a binary 8-bit PGM as a 1 x H x W array in [0, 1]."""
    path = Path(path)
    with open(path, "rb") as f:
        if f.read(2) != PGM_MAGIC:
            raise ImageFormatError(f"{path} is not a binary (P5) PGM file.")
    try:
        with Image.open(path) as image:
            image.load()
            if image.mode != "L":
                raise ImageFormatError(f"{path}: only 8-bit PGM is supported, got mode {image.mode}.")
            levels = np.asarray(image, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as e:
        raise ImageFormatError(f"{path}: malformed PGM ({e}).")

    return (levels.astype(np.float64) / 255.0)[None].astype(dtype)


def load_image_file(path: Path | str, dtype: Any = np.float32) -> Tensor:
    """Load a PTNS tensor or an 8-bit binary PGM image (mapped to [0, 1])."""
    path = Path(path)
    if not path.is_file():
        raise ImageFormatError(f"No image file at {path}.")
    if path.suffix.lower() == ".ptns":
        return Tensor(ptns.load(path))
    return Tensor(read_pgm(path, dtype))


def load_grayscale(path: Path | str, height: int, width: int) -> np.ndarray:
    """Decode any image Pillow understands (or PTNS) into a 1 x H x W array in [0, 1]."""
    path = Path(path)
    if path.suffix.lower() == ".ptns":
        values = ptns.load(path)
        values = values.reshape(-1, *values.shape[-2:])[0].astype(np.float64)
        if values.shape == (height, width):
            return values[None]
        image = Image.fromarray(to_uint8(values), mode="L")
    else:
        try:
            with Image.open(path) as opened:
                image = opened.convert("L")
        except (UnidentifiedImageError, OSError) as e:
            raise ImageFormatError(f"{path}: cannot decode image ({e}).")

    if image.size != (width, height):
        logger.trace(f"Resizing {path.name} from {image.size} to {(width, height)}")
        image = image.resize((width, height), Image.BILINEAR)
    return (np.asarray(image, dtype=np.float64) / 255.0)[None]
