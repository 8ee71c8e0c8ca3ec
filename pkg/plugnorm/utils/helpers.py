import csv
from pathlib import Path
from typing import Any, Iterable, Sequence

from loguru import logger
from tqdm import tqdm

from plugnorm import constants
from plugnorm.errors import ConfigError

_LEVELS = {"TRACE": 5, "DEBUG": 10, "INFO": 20, "SUCCESS": 25, "WARNING": 30, "ERROR": 40, "CRITICAL": 50}


def progress(iterable: Iterable, desc: str, total: int | None = None) -> Iterable:
    """Wrap `iterable` in a tqdm bar unless stderr logging is quieter than INFO."""
    quiet = _LEVELS.get(constants.LOG_LEVEL, 20) > _LEVELS["INFO"]
    return tqdm(iterable, desc=desc, total=total, disable=quiet, leave=False, dynamic_ncols=True)


def parse_shape(text: str) -> tuple[int, int]:
    """Parse `HxW`, e.g. `400x400`."""
    try:
        height, width = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"Expected a size like 400x400, got `{text}`.")
    if height < 1 or width < 1:
        raise ConfigError(f"Sizes must be positive, got `{text}`.")
    return height, width


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow(row)
            count += 1
    logger.debug(f"Wrote {count} rows to {path}")
    return path


def format_float(value: float) -> str:
    """Fixed repr for report cells, `nan` for missing values."""
    return f"{value:.6f}" if value == value else "nan"
