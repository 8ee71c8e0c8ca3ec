"""
Multi-vendor datasets on disk.

Layout: `<root>/<vendor>/<split>/<id>_img.ptns` and `<id>_mask.ptns`, plus
`<root>/manifest.tsv` with one tab-separated line per sample: id, vendor,
class, split, image path, mask path (paths relative to the root).
"""
import hashlib
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from loguru import logger
from tqdm import tqdm

from plugnorm.constants import THREADS, FileNames
from plugnorm.core import ptns
from plugnorm.errors import ConfigError, DatasetExistsError, PlugnormIOError
from plugnorm.data.synth import SHAPE_CLASSES, VendorProfile, generate_sample, sample_rng

DEFAULT_SPLITS = {"train": 0.8, "test": 0.2}


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    vendor: str
    shape_class: str
    split: str
    image: str
    mask: str

    def line(self) -> str:
        return "\t".join((self.id, self.vendor, self.shape_class, self.split, self.image, self.mask))

    @classmethod
    def parse(cls, line: str) -> "ManifestEntry":
        fields = line.rstrip("\n").split("\t")
        if len(fields) != 6:
            raise PlugnormIOError(f"Malformed manifest line: {line!r}.")
        return cls(*fields)


class Manifest(list[ManifestEntry]):
    def text(self) -> str:
        return "".join(f"{entry.line()}\n" for entry in self)

    def select(self, vendor: str | None = None, split: str | None = None) -> "Manifest":
        return Manifest(
            entry
            for entry in self
            if (vendor is None or entry.vendor == vendor) and (split is None or entry.split == split)
        )

    @property
    def vendors(self) -> list[str]:
        return sorted({entry.vendor for entry in self})

    def write(self, root: Path) -> Path:
        path = root / FileNames.manifest
        path.write_text(self.text())
        return path

    @classmethod
    def read(cls, root: Path | str) -> "Manifest":
        path = Path(root) / FileNames.manifest
        if not path.is_file():
            raise PlugnormIOError(f"No dataset manifest at {path}.")
        return cls(ManifestEntry.parse(line) for line in path.read_text().splitlines() if line)


def split_counts(n: int, splits: Mapping[str, float]) -> dict[str, int]:
    """Round every share to the nearest count; the last split takes the remainder."""
    if not splits:
        raise ConfigError("At least one split is required.")
    if any(ratio < 0 for ratio in splits.values()) or not np.isclose(sum(splits.values()), 1.0):
        raise ConfigError(f"Split ratios must be non-negative and sum to 1, got {dict(splits)}.")
    names = list(splits)
    counts = {name: int(np.floor(n * splits[name] + 0.5)) for name in names[:-1]}
    counts[names[-1]] = n - sum(counts.values())
    if counts[names[-1]] < 0:
        raise ConfigError(f"Split ratios {dict(splits)} overshoot {n} samples.")
    return counts


def _split_of(index: int, counts: Mapping[str, int]) -> str:
    for name, count in counts.items():
        if index < count:
            return name
        index -= count
    raise IndexError(index)


def _is_empty(root: Path) -> bool:
    return not root.exists() or not any(root.iterdir())


def _clear_samples(root: Path, vendors: Iterable[str]) -> None:
    """Remove the sample folders of `vendors` and of every vendor in an existing manifest."""
    stale = set(vendors)
    if (root / FileNames.manifest).is_file():
        stale.update(Manifest.read(root).vendors)
        (root / FileNames.manifest).unlink()
    for vendor in sorted(stale):
        folder = root / vendor
        if folder.is_dir():
            logger.debug(f"Removing stale samples in {folder}")
            shutil.rmtree(folder)


def generate_dataset(
    root: Path | str,
    profiles: Mapping[str, VendorProfile],
    n_per_vendor: int | Mapping[str, int],
    splits: Mapping[str, float] = DEFAULT_SPLITS,
    seed: int = 0,
    height: int = 64,
    width: int = 64,
    force: bool = False,
    workers: int = THREADS,
) -> Manifest:
    """
    Render every vendor's samples and write them with the manifest.

    Sample `i` of a vendor draws from a generator seeded by (seed, vendor
    profile seed, i), so the output does not depend on `workers`. Shape
    classes alternate head, abdomen, head, ...
    """
    root = Path(root)
    if not _is_empty(root) and not force:
        raise DatasetExistsError(f"{root} is not empty; pass --force to overwrite.")
    if force:
        _clear_samples(root, profiles)
    root.mkdir(parents=True, exist_ok=True)

    jobs: list[tuple[str, VendorProfile, int, str]] = []
    for vendor, profile in profiles.items():
        n = n_per_vendor[vendor] if isinstance(n_per_vendor, Mapping) else n_per_vendor
        counts = split_counts(n, splits)
        jobs += [(vendor, profile, index, _split_of(index, counts)) for index in range(n)]

    def render(job: tuple[str, VendorProfile, int, str]) -> ManifestEntry:
        vendor, profile, index, split = job
        sample_id = f"{vendor}{index:05d}"
        shape_class = SHAPE_CLASSES[index % len(SHAPE_CLASSES)]
        sample = generate_sample(
            profile, shape_class, height, width, sample_rng(seed, profile.seed, index), vendor, sample_id
        )
        folder = Path(vendor) / split
        (root / folder).mkdir(parents=True, exist_ok=True)
        entry = ManifestEntry(
            sample_id,
            vendor,
            shape_class,
            split,
            (folder / f"{sample_id}_img.ptns").as_posix(),
            (folder / f"{sample_id}_mask.ptns").as_posix(),
        )
        ptns.save(root / entry.image, sample.image.astype(np.float32))
        ptns.save(root / entry.mask, sample.mask.astype(np.float32))
        return entry

    logger.info(f"Generating {len(jobs)} samples for vendors {list(profiles)} into {root}")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        entries = list(tqdm(pool.map(render, jobs), total=len(jobs), desc="gen-data", leave=False))

    manifest = Manifest(entries)
    manifest.write(root)
    return manifest


def manifest_digest(root: Path | str) -> str:
    """SHA-256 over the manifest and every file it references, in manifest order."""
    root = Path(root)
    manifest = Manifest.read(root)
    digest = hashlib.sha256(manifest.text().encode())
    for entry in manifest:
        digest.update((root / entry.image).read_bytes())
        digest.update((root / entry.mask).read_bytes())
    return digest.hexdigest()


def load_entries(root: Path | str, entries: Iterable[ManifestEntry]) -> tuple[np.ndarray, np.ndarray]:
    """Stack images and masks of `entries` into N x 1 x H x W arrays."""
    root = Path(root)
    entries = list(entries)
    if not entries:
        return np.zeros((0, 1, 1, 1)), np.zeros((0, 1, 1, 1))
    images = np.stack([ptns.load(root / entry.image) for entry in entries])
    masks = np.stack([ptns.load(root / entry.mask) for entry in entries])
    return images, masks


def load_split(root: Path | str, vendor: str, split: str) -> tuple[Manifest, np.ndarray, np.ndarray]:
    entries = Manifest.read(root).select(vendor, split)
    logger.debug(f"Loading {len(entries)} {vendor}/{split} samples from {root}")
    images, masks = load_entries(root, entries)
    return entries, images, masks
