from plugnorm.data.corpus import load_content_dir, synthetic_texture_corpus
from plugnorm.data.dataset import Manifest, ManifestEntry, generate_dataset, load_split, manifest_digest
from plugnorm.data.io import load_grayscale, load_image_file, read_pgm, save_pgm
from plugnorm.data.synth import DEFAULT_PROFILES, Sample, VendorProfile, generate_sample

__all__ = [
    "DEFAULT_PROFILES",
    "Manifest",
    "ManifestEntry",
    "Sample",
    "VendorProfile",
    "generate_dataset",
    "generate_sample",
    "load_content_dir",
    "load_grayscale",
    "load_image_file",
    "load_split",
    "manifest_digest",
    "read_pgm",
    "save_pgm",
    "synthetic_texture_corpus",
]
