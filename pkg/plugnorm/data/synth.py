"""
Synthetic ultrasound-like samples from parametric vendor profiles.

A sample is rendered in two phases drawing from the same generator: the
structure phase draws the anatomy (mask, rim and interior texture) and the
appearance phase applies the vendor profile. Since the structure phase
consumes the generator first, equal seeds give identical masks under every
profile.
"""
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.ndimage import distance_transform_edt, gaussian_filter

from plugnorm.errors import ConfigError

ShapeClass = Literal["head", "abdomen"]
SHAPE_CLASSES: tuple[ShapeClass, ...] = ("head", "abdomen")

MIN_MASK_FRACTION = 0.05
RAYLEIGH_UNIT_MEAN_SCALE = np.sqrt(2.0 / np.pi)

# Base rendering levels. Vendor B maps the interior level to roughly the
# tissue level of the identity profile.
BACKGROUND_LEVEL = 0.2
INTERIOR_LEVEL = 0.38
RIM_FLOOR = 0.42
RIM_SPAN = 0.45


@dataclass(frozen=True)
class VendorProfile:
    """
    Appearance model of one vendor.

    image = clamp(gamma(blur(speckle(tgc(gain(base)))))), where tgc multiplies
    each row by 1 + tgc_slope * depth (depth 0 at the top, 1 at the bottom)
    and speckle multiplies by 1 + speckle_strength * (R - 1) with R Rayleigh
    distributed with unit mean. The linear TGC ramp is a stand-in model.
    """

    gain: float = 1.0
    speckle_strength: float = 0.0
    tgc_slope: float = 0.0
    blur_sigma: float = 0.0
    gamma: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.gain <= 0 or self.gamma <= 0:
            raise ConfigError(f"Vendor gain and gamma must be positive: {self}.")
        if self.speckle_strength < 0 or self.blur_sigma < 0:
            raise ConfigError(f"Speckle strength and blur must be non-negative: {self}.")

    @property
    def is_identity(self) -> bool:
        return (self.gain, self.speckle_strength, self.tgc_slope, self.blur_sigma, self.gamma) == (
            1.0,
            0.0,
            0.0,
            0.0,
            1.0,
        )


# Vendor B is the harder shift, vendor C the milder one.
DEFAULT_PROFILES = {
    "A": VendorProfile(seed=0),
    "B": VendorProfile(gain=0.7, speckle_strength=0.3, tgc_slope=0.4, blur_sigma=1.0, gamma=1.4, seed=1),
    "C": VendorProfile(gain=1.2, speckle_strength=0.15, tgc_slope=-0.3, blur_sigma=0.5, gamma=0.8, seed=2),
}


@dataclass(frozen=True, eq=False)
class Sample:
    image: np.ndarray
    mask: np.ndarray
    vendor: str
    shape_class: ShapeClass
    id: str = ""


def _smooth_noise(rng: np.random.Generator, height: int, width: int, sigma: float) -> np.ndarray:
    noise = gaussian_filter(rng.standard_normal((height, width)), sigma)
    return noise / (np.abs(noise).max() + 1e-12)


def _head_mask(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    size = min(height, width)
    cy, cx = rng.uniform(0.4, 0.6) * height, rng.uniform(0.4, 0.6) * width
    a = rng.uniform(0.24, 0.32) * size
    b = a * rng.uniform(0.72, 0.92)
    theta = rng.uniform(0.0, np.pi)
    dy, dx = yy - cy, xx - cx
    u = (dx * np.cos(theta) + dy * np.sin(theta)) / a
    v = (-dx * np.sin(theta) + dy * np.cos(theta)) / b
    return u * u + v * v <= 1.0


def _abdomen_mask(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    size = min(height, width)
    cy, cx = rng.uniform(0.4, 0.6) * height, rng.uniform(0.4, 0.6) * width
    radius = rng.uniform(0.24, 0.3) * size
    angle = np.arctan2(yy - cy, xx - cx)
    outline = np.ones_like(angle)
    for harmonic in (2, 3, 4):
        outline += rng.uniform(0.0, 0.12) * np.cos(harmonic * angle + rng.uniform(0, 2 * np.pi))
    blob = np.hypot(yy - cy, xx - cx) <= radius * outline
    return gaussian_filter(blob.astype(np.float64), sigma=1.5) > 0.5


def render_structure(
    shape_class: ShapeClass, height: int, width: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """
    Draw a mask and its base rendering: a bright rim and textured interior in
    darker textured tissue. Masks covering less than 5% of the image
    are redrawn.
    """
    if shape_class not in SHAPE_CLASSES:
        raise ConfigError(f"Unknown shape class `{shape_class}` (expected one of {SHAPE_CLASSES}).")
    draw = _head_mask if shape_class == "head" else _abdomen_mask
    while True:
        mask = draw(rng, height, width)
        if mask.mean() >= MIN_MASK_FRACTION:
            break

    rim_width = max(1.0, 0.06 * min(height, width))
    inside_depth = distance_transform_edt(mask)
    rim = mask & (inside_depth <= rim_width)

    # The rim echoes strongest where the outline faces the transducer (top and
    # bottom) and fades to interior level on the lateral sides.
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    cy, cx = np.argwhere(mask).mean(axis=0)
    facing = np.sin(np.arctan2(yy - cy, xx - cx)) ** 2

    tissue = (
        BACKGROUND_LEVEL
        + 0.06 * _smooth_noise(rng, height, width, 3.0)
        + 0.03 * _smooth_noise(rng, height, width, 1.0)
    )
    interior = INTERIOR_LEVEL + 0.06 * _smooth_noise(rng, height, width, 1.5)
    echo = RIM_FLOOR + RIM_SPAN * facing + 0.05 * _smooth_noise(rng, height, width, 1.0)
    base = np.where(mask, interior, tissue)
    base = np.where(rim, echo, base)
    return np.clip(base, 0.0, 1.0), mask.astype(np.float64)


def apply_profile(base: np.ndarray, profile: VendorProfile, rng: np.random.Generator) -> np.ndarray:
    """Apply gain, TGC ramp, speckle, blur and gamma, then clamp to [0, 1]."""
    image = base * profile.gain
    if profile.tgc_slope != 0:
        depth = np.linspace(0.0, 1.0, base.shape[0])[:, None]
        image = image * (1.0 + profile.tgc_slope * depth)
    if profile.speckle_strength > 0:
        rayleigh = rng.rayleigh(scale=RAYLEIGH_UNIT_MEAN_SCALE, size=base.shape)
        image = image * (1.0 + profile.speckle_strength * (rayleigh - 1.0))
    if profile.blur_sigma > 0:
        image = gaussian_filter(image, profile.blur_sigma)
    image = np.maximum(image, 0.0) ** profile.gamma
    return np.clip(image, 0.0, 1.0)


def generate_sample(
    profile: VendorProfile,
    shape_class: ShapeClass,
    height: int,
    width: int,
    rng: np.random.Generator,
    vendor: str = "",
    sample_id: str = "",
) -> Sample:
    base, mask = render_structure(shape_class, height, width, rng)
    image = apply_profile(base, profile, rng)
    return Sample(image[None], mask[None], vendor, shape_class, sample_id)


def sample_rng(base_seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent generator per (seed, stream, index), so results do not depend on worker count."""
    return np.random.default_rng(np.random.SeedSequence([base_seed, stream, index]))
