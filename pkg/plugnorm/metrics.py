"""
Overlap and boundary-distance metrics on binary masks.

Conventions: when both masks are empty Dice and Jaccard are 1; precision
with an empty prediction and recall with an empty ground truth are reported
as 1. A boundary pixel is a foreground pixel with a 4-neighbour in the
background, pixels outside the image counting as background. Distances are
Euclidean, in pixels, and undefined (an error) when either mask is empty.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from loguru import logger
from scipy.ndimage import binary_erosion, generate_binary_structure
from scipy.spatial.distance import cdist

from plugnorm.constants import METRIC_NAMES, THREADS
from plugnorm.errors import ShapeError, UndefinedDistanceError
from plugnorm.utils.helpers import format_float, write_csv

FOUR_CONNECTED = generate_binary_structure(2, 1)


@dataclass(frozen=True, eq=False)
class MaskPair:
    prediction: np.ndarray
    ground_truth: np.ndarray

    def __post_init__(self) -> None:
        pred = np.asarray(self.prediction)
        gt = np.asarray(self.ground_truth)
        if pred.shape != gt.shape:
            raise ShapeError(f"Prediction {pred.shape} and ground truth {gt.shape} differ in shape.")
        if pred.ndim != 2 or pred.size == 0:
            raise ShapeError(f"Masks must be non-empty H x W arrays, got {pred.shape}.")
        for name, mask in (("prediction", pred), ("ground truth", gt)):
            if not np.isin(mask, (0, 1)).all():
                raise ShapeError(f"The {name} mask holds values other than 0 and 1.")
        object.__setattr__(self, "prediction", pred.astype(bool))
        object.__setattr__(self, "ground_truth", gt.astype(bool))

    @classmethod
    def from_arrays(cls, prediction: Any, ground_truth: Any) -> "MaskPair":
        """Squeeze leading singleton axes and binarize at 0.5."""
        pred = np.asarray(prediction, dtype=np.float64)
        gt = np.asarray(ground_truth, dtype=np.float64)
        while pred.ndim > 2 and pred.shape[0] == 1:
            pred, gt = pred[0], gt[0]
        return cls(pred > 0.5, gt > 0.5)

    def counts(self) -> tuple[int, int, int]:
        """(|P and G|, |P|, |G|)"""
        pred, gt = self.prediction, self.ground_truth
        return int((pred & gt).sum()), int(pred.sum()), int(gt.sum())


@dataclass(frozen=True)
class MetricReport:
    dice: float
    jac: float
    hdb: float
    asd: float
    pre: float
    rec: float
    distance_failure: bool = field(default=False)


def dice(pair: MaskPair) -> float:
    overlap, p, g = pair.counts()
    return 1.0 if p + g == 0 else 2.0 * overlap / (p + g)


def jaccard(pair: MaskPair) -> float:
    overlap, p, g = pair.counts()
    union = p + g - overlap
    return 1.0 if union == 0 else overlap / union


def precision(pair: MaskPair) -> float:
    overlap, p, _ = pair.counts()
    return 1.0 if p == 0 else overlap / p


def recall(pair: MaskPair) -> float:
    overlap, _, g = pair.counts()
    return 1.0 if g == 0 else overlap / g


def boundary(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels 4-adjacent to background."""
    mask = np.asarray(mask, dtype=bool)
    return mask & ~binary_erosion(mask, structure=FOUR_CONNECTED, border_value=0)


def _boundary_distances(pair: MaskPair) -> tuple[np.ndarray, np.ndarray]:
    _, p, g = pair.counts()
    if p == 0 or g == 0:
        raise UndefinedDistanceError("Boundary distances are undefined for an empty mask.")
    pred_points = np.argwhere(boundary(pair.prediction)).astype(np.float64)
    gt_points = np.argwhere(boundary(pair.ground_truth)).astype(np.float64)
    distances = cdist(pred_points, gt_points)
    return distances.min(axis=1), distances.min(axis=0)


def hdb(pair: MaskPair) -> float:
    """Hausdorff distance between the two boundaries."""
    pred_to_gt, gt_to_pred = _boundary_distances(pair)
    return float(max(pred_to_gt.max(), gt_to_pred.max()))


def asd(pair: MaskPair) -> float:
    """Mean nearest-boundary distance over the points of both boundaries."""
    pred_to_gt, gt_to_pred = _boundary_distances(pair)
    return float(np.concatenate([pred_to_gt, gt_to_pred]).mean())


def evaluate_pair(pair: MaskPair) -> MetricReport:
    try:
        hd, sd, failure = hdb(pair), asd(pair), False
    except UndefinedDistanceError:
        hd, sd, failure = float("nan"), float("nan"), True
    return MetricReport(dice(pair), jaccard(pair), hd, sd, precision(pair), recall(pair), failure)


@dataclass(frozen=True)
class ReportRow:
    id: str
    vendor: str
    method: str
    report: MetricReport

    def cells(self) -> list[str]:
        values = [format_float(getattr(self.report, name)) for name in METRIC_NAMES]
        return [self.id, self.vendor, self.method, *values, str(int(self.report.distance_failure))]


REPORT_HEADER = ["id", "vendor", "method", *METRIC_NAMES, "distance_failure"]
AGGREGATE_ID = "mean"


def evaluate_masks(
    ids: Sequence[str],
    vendor: str,
    method: str,
    predictions: Sequence[np.ndarray],
    ground_truths: Sequence[np.ndarray],
    workers: int = THREADS,
) -> list[ReportRow]:
    """Score every sample, in input order."""
    pairs = [MaskPair.from_arrays(p, g) for p, g in zip(predictions, ground_truths)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        reports = list(pool.map(evaluate_pair, pairs))
    failures = sum(report.distance_failure for report in reports)
    if failures:
        logger.warning(f"{failures} {vendor}/{method} sample(s) have empty masks; HDB and ASD recorded as failures.")
    return [ReportRow(sample_id, vendor, method, report) for sample_id, report in zip(ids, reports)]


def aggregate(rows: Iterable[ReportRow], vendor: str, method: str) -> ReportRow:
    """Mean of every metric; distance means skip failed samples."""
    reports = [row.report for row in rows]
    if not reports:
        nan = float("nan")
        return ReportRow(AGGREGATE_ID, vendor, method, MetricReport(nan, nan, nan, nan, nan, nan))
    matrix = np.array([astuple(report)[: len(METRIC_NAMES)] for report in reports], dtype=np.float64)
    with np.errstate(all="ignore"):
        means = [
            float(np.nanmean(column)) if not np.isnan(column).all() else float("nan")
            for column in matrix.T
        ]
    failure = any(report.distance_failure for report in reports)
    return ReportRow(AGGREGATE_ID, vendor, method, MetricReport(*means, distance_failure=failure))


def write_report(path: Path | str, rows: Iterable[ReportRow]) -> Path:
    return write_csv(path, REPORT_HEADER, (row.cells() for row in rows))


