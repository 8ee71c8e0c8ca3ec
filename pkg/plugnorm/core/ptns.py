"""
PTNS binary tensor files.

Layout: magic `PTNS`, u8 version (1), u8 dtype code (1 = f32, 2 = f64),
u8 rank, `rank` little-endian u32 extents, then the row-major little-endian
payload.
"""
import struct
from pathlib import Path
from typing import Any

import numpy as np

from plugnorm.errors import ImageFormatError

MAGIC = b"PTNS"
VERSION = 1
DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
CODES_BY_DTYPE = {dtype: code for code, dtype in DTYPE_CODES.items()}
_HEADER = struct.Struct("<4sBBB")


def encode(array: Any) -> bytes:
    """Serialize a float32/float64 array (or Tensor) to PTNS bytes."""
    array = np.asarray(array)
    dtype = array.dtype.newbyteorder("<")
    if dtype not in CODES_BY_DTYPE:
        raise ImageFormatError(f"PTNS stores 32- or 64-bit floats, not {array.dtype}.")
    if array.ndim > 255:
        raise ImageFormatError(f"PTNS rank is limited to 255, got {array.ndim}.")

    header = _HEADER.pack(MAGIC, VERSION, CODES_BY_DTYPE[dtype], array.ndim)
    extents = struct.pack(f"<{array.ndim}I", *array.shape)
    payload = np.ascontiguousarray(array, dtype=dtype).tobytes()
    return header + extents + payload


def decode(raw: bytes) -> np.ndarray:
    """Parse PTNS bytes into a read-write numpy array."""
    if len(raw) < _HEADER.size:
        raise ImageFormatError("Truncated PTNS header.")
    magic, version, code, rank = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ImageFormatError(f"Bad PTNS magic {magic!r}.")
    if version != VERSION:
        raise ImageFormatError(f"Unsupported PTNS version {version}.")
    if code not in DTYPE_CODES:
        raise ImageFormatError(f"Unknown PTNS dtype code {code}.")

    offset = _HEADER.size + 4 * rank
    if len(raw) < offset:
        raise ImageFormatError("Truncated PTNS extents.")
    shape = struct.unpack_from(f"<{rank}I", raw, _HEADER.size)
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(raw) - offset != expected:
        raise ImageFormatError(
            f"PTNS payload holds {len(raw) - offset} bytes, expected {expected} for {shape}."
        )

    return np.frombuffer(raw, dtype=dtype, offset=offset).reshape(shape).astype(dtype.newbyteorder("="))


def save(path: Path | str, array: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode(array))
    return path


def load(path: Path | str) -> np.ndarray:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise ImageFormatError(f"No tensor file at {path}.")
    try:
        return decode(raw)
    except ImageFormatError as e:
        raise ImageFormatError(f"{path}: {e}")
