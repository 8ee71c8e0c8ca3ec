"""
Checkpoint containers.

A checkpoint is a directory of PTNS tensors plus `manifest.yaml` recording the
kind of container, the tensor name -> file mapping, the configuration, the
seed and free-form metadata (plug sites, unit sources, ...).
"""
import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml
from loguru import logger

from plugnorm.constants import FileNames
from plugnorm.core import ptns
from plugnorm.errors import CheckpointError, ConfigMismatchError
from plugnorm.nn.style import AdaINUnit, DinNet, DinUnit
from plugnorm.nn.unet import UNet, UNetConfig


@dataclass
class Checkpoint:
    kind: str
    tensors: dict[str, np.ndarray]
    config: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    meta: dict[str, Any] = field(default_factory=dict)


def save_checkpoint(
    directory: Path | str,
    kind: str,
    tensors: Mapping[str, np.ndarray],
    config: Mapping[str, Any] | None = None,
    seed: int | None = None,
    meta: Mapping[str, Any] | None = None,
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, array in tensors.items():
        files[name] = f"{name}.ptns"
        ptns.save(directory / files[name], array)

    manifest = {
        "kind": kind,
        "seed": seed,
        "config": dict(config or {}),
        "meta": dict(meta or {}),
        "tensors": files,
    }
    (directory / FileNames.checkpoint_manifest).write_text(yaml.safe_dump(manifest, sort_keys=True))
    logger.debug(f"Saved {kind} checkpoint with {len(files)} tensors to {directory}")
    return directory


def load_checkpoint(directory: Path | str, kind: str | None = None) -> Checkpoint:
    directory = Path(directory)
    manifest_path = directory / FileNames.checkpoint_manifest
    if not manifest_path.is_file():
        raise CheckpointError(f"No checkpoint manifest at {manifest_path}.")

    manifest = yaml.safe_load(manifest_path.read_text()) or {}
    if kind is not None and manifest.get("kind") != kind:
        raise CheckpointError(
            f"{directory} holds a `{manifest.get('kind')}` checkpoint, expected `{kind}`."
        )
    tensors = {}
    for name, filename in (manifest.get("tensors") or {}).items():
        path = directory / filename
        if not path.is_file():
            raise CheckpointError(f"Checkpoint {directory} is missing tensor file {filename}.")
        tensors[name] = ptns.load(path)

    return Checkpoint(
        kind=manifest["kind"],
        tensors=tensors,
        config=manifest.get("config") or {},
        seed=manifest.get("seed"),
        meta=manifest.get("meta") or {},
    )


def checkpoint_digest(directory: Path | str) -> str:
    """SHA-256 over every file of the container, in name order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise CheckpointError(f"No checkpoint directory at {directory}.")
    digest = hashlib.sha256()
    for path in sorted(p for p in directory.iterdir() if p.is_file()):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


# Segmentation networks


def save_network(directory: Path | str, net: UNet, seed: int, meta: Mapping[str, Any] | None = None) -> Path:
    return save_checkpoint(directory, "unet", net.state_dict(), asdict(net.config), seed, meta)


def load_network(
    directory: Path | str, expected: UNetConfig | None = None, dtype: Any = np.float32
) -> UNet:
    """Rebuild a U-Net from its container, refusing a mismatched configuration."""
    checkpoint = load_checkpoint(directory, "unet")
    config = UNetConfig(**checkpoint.config)
    if expected is not None and expected != config:
        raise ConfigMismatchError(
            f"Checkpoint {directory} was trained with {config}, the config asks for {expected}."
        )
    net = UNet(config, np.random.default_rng(checkpoint.seed or 0), dtype)
    net.load_state_dict(checkpoint.tensors)
    return net


# DIN-nets


def save_din_nets(
    directory: Path | str, nets: Mapping[str, DinNet], seed: int, meta: Mapping[str, Any] | None = None
) -> Path:
    tensors = {
        f"{site}.{name}": values for site, net in nets.items() for name, values in net.state_dict().items()
    }
    sites = {site: {"channels": net.channels, "kernel_size": net.kernel_size} for site, net in nets.items()}
    return save_checkpoint(directory, "din_nets", tensors, {"sites": sites}, seed, meta)


def load_din_nets(directory: Path | str, dtype: Any = np.float32) -> dict[str, DinNet]:
    checkpoint = load_checkpoint(directory, "din_nets")
    nets = {}
    for site, shape in checkpoint.config["sites"].items():
        net = DinNet(shape["channels"], shape["kernel_size"], dtype=dtype)
        prefix = f"{site}."
        net.load_state_dict(
            {name[len(prefix) :]: values for name, values in checkpoint.tensors.items() if name.startswith(prefix)}
        )
        nets[site] = net
    return nets


# Plug-and-play units


@dataclass
class UnitSet:
    din: dict[str, DinUnit] = field(default_factory=dict)
    adain: dict[str, AdaINUnit] = field(default_factory=dict)


def save_units(directory: Path | str, units: UnitSet, meta: Mapping[str, Any] | None = None) -> Path:
    tensors: dict[str, np.ndarray] = {}
    records: dict[str, dict[str, Any]] = {"din": {}, "adain": {}}
    for site, unit in units.din.items():
        tensors[f"din.{site}.weight"] = unit.weight
        tensors[f"din.{site}.bias"] = unit.bias
        records["din"][site] = {
            "layer_id": unit.layer_id,
            "kernel_size": unit.kernel_size,
            "source": unit.source,
            "digest": unit.digest(),
        }
    for site, unit in units.adain.items():
        tensors[f"adain.{site}.mu"] = unit.mu
        tensors[f"adain.{site}.sigma"] = unit.sigma
        records["adain"][site] = {"layer_id": unit.layer_id, "source": unit.source}
    return save_checkpoint(directory, "units", tensors, records, meta=meta)


def load_units(directory: Path | str) -> UnitSet:
    checkpoint = load_checkpoint(directory, "units")
    tensors, records = checkpoint.tensors, checkpoint.config
    units = UnitSet()
    for site, record in (records.get("din") or {}).items():
        unit = DinUnit(
            record["layer_id"],
            tensors[f"din.{site}.weight"],
            tensors[f"din.{site}.bias"],
            source=record["source"],
        )
        if unit.digest() != record["digest"]:
            raise CheckpointError(f"DIN unit `{site}` in {directory} does not match its digest.")
        units.din[site] = unit
    for site, record in (records.get("adain") or {}).items():
        units.adain[site] = AdaINUnit(
            record["layer_id"],
            tensors[f"adain.{site}.mu"],
            tensors[f"adain.{site}.sigma"],
            source=record["source"],
        )
    return units
