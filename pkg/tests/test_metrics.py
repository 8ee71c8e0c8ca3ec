import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plugnorm.errors import ShapeError, UndefinedDistanceError
from plugnorm.metrics import (
    AGGREGATE_ID,
    REPORT_HEADER,
    MaskPair,
    aggregate,
    asd,
    boundary,
    dice,
    evaluate_masks,
    evaluate_pair,
    hdb,
    jaccard,
    precision,
    recall,
    write_report,
)


def square(size, top, left, extent=2):
    mask = np.zeros((size, size), dtype=bool)
    mask[top : top + extent, left : left + extent] = True
    return mask


def naive_boundary(mask):
    points = []
    height, width = mask.shape
    for i in range(height):
        for j in range(width):
            if not mask[i, j]:
                continue
            neighbours = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
            if any(not (0 <= a < height and 0 <= b < width) or not mask[a, b] for a, b in neighbours):
                points.append((i, j))
    return points


def naive_distances(pred, gt):
    a = np.array(naive_boundary(pred), dtype=np.float64)
    b = np.array(naive_boundary(gt), dtype=np.float64)
    table = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))
    forward, backward = table.min(axis=1), table.min(axis=0)
    return max(forward.max(), backward.max()), float(np.concatenate([forward, backward]).mean())


def test_identical_masks():
    mask = square(6, 1, 1, 3)
    report = evaluate_pair(MaskPair(mask, mask))
    assert (report.dice, report.jac, report.pre, report.rec) == (1.0, 1.0, 1.0, 1.0)
    assert report.hdb == 0.0 and report.asd == 0.0


def test_disjoint_masks():
    pair = MaskPair(square(6, 0, 0), square(6, 4, 4))
    assert dice(pair) == 0.0 and jaccard(pair) == 0.0
    assert precision(pair) == 0.0 and recall(pair) == 0.0


def test_half_overlapping_squares():
    pair = MaskPair(square(4, 0, 0), square(4, 0, 1))
    assert dice(pair) == 0.5
    assert jaccard(pair) == pytest.approx(1 / 3)
    assert precision(pair) == 0.5 and recall(pair) == 0.5


def test_single_pixel_distances():
    pred, gt = np.zeros((8, 8), dtype=bool), np.zeros((8, 8), dtype=bool)
    pred[0, 0], gt[3, 4] = True, True
    pair = MaskPair(pred, gt)
    assert hdb(pair) == 5.0 and asd(pair) == 5.0


def test_empty_mask_conventions():
    empty = np.zeros((4, 4), dtype=bool)
    pair = MaskPair(empty, empty)
    assert dice(pair) == jaccard(pair) == precision(pair) == recall(pair) == 1.0
    with pytest.raises(UndefinedDistanceError):
        hdb(MaskPair(empty, square(4, 0, 0)))
    report = evaluate_pair(MaskPair(empty, square(4, 0, 0)))
    assert report.distance_failure and math.isnan(report.hdb) and math.isnan(report.asd)
    assert report.pre == 1.0 and report.rec == 0.0


def test_boundary_counts_image_border_as_background():
    full = np.ones((4, 4), dtype=bool)
    expected = full.copy()
    expected[1:3, 1:3] = False
    np.testing.assert_array_equal(boundary(full), expected)


def test_mask_validation():
    with pytest.raises(ShapeError):
        MaskPair(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ShapeError):
        MaskPair(np.full((2, 2), 0.5), np.zeros((2, 2)))
    pair = MaskPair.from_arrays(np.full((1, 1, 2, 2), 0.7), np.zeros((1, 1, 2, 2)))
    assert pair.prediction.shape == (2, 2) and pair.prediction.all()


masks = st.integers(0, 2**16).map(lambda seed: np.random.default_rng(seed).uniform(size=(16, 16)) > 0.6)


def oracle_overlap(pred, gt):
    overlap, p, g = 0, 0, 0
    for a, b in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        overlap += a and b
        p += a
        g += b
    union = p + g - overlap
    return (
        1.0 if p + g == 0 else 2 * overlap / (p + g),
        1.0 if union == 0 else overlap / union,
        1.0 if p == 0 else overlap / p,
        1.0 if g == 0 else overlap / g,
    )


def test_metrics_equal_brute_force_on_random_pairs():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        pred = rng.uniform(size=(16, 16)) < rng.uniform(0.1, 0.8)
        gt = rng.uniform(size=(16, 16)) < rng.uniform(0.1, 0.8)
        pair = MaskPair(pred, gt)
        assert (dice(pair), jaccard(pair), precision(pair), recall(pair)) == oracle_overlap(pred, gt)
        if pred.any() and gt.any():
            expected_hdb, expected_asd = naive_distances(pred, gt)
            assert hdb(pair) == expected_hdb
            assert abs(asd(pair) - expected_asd) <= 1e-12


@given(masks, masks)
def test_metric_relations(pred, gt):
    pair, swapped = MaskPair(pred, gt), MaskPair(gt, pred)
    d, j = dice(pair), jaccard(pair)
    assert d == pytest.approx(2 * j / (1 + j))
    assert d == pytest.approx(dice(swapped))
    assert precision(pair) == pytest.approx(recall(swapped))
    if pred.any() and gt.any():
        assert hdb(pair) >= asd(pair) - 1e-12
        assert hdb(pair) == pytest.approx(hdb(swapped))
        assert asd(pair) == pytest.approx(asd(swapped))


def test_report_rows_and_aggregate(tmp_path):
    gt = [square(8, 1, 1, 4)[None]] * 3
    preds = [gt[0], square(8, 2, 2, 4)[None], np.zeros((1, 8, 8))]
    rows = evaluate_masks(["s0", "s1", "s2"], "B", "m-dinseg", preds, gt, workers=2)
    assert [row.id for row in rows] == ["s0", "s1", "s2"]
    assert rows[0].report.dice == 1.0
    assert rows[2].report.distance_failure

    mean = aggregate(rows, "B", "m-dinseg")
    assert mean.id == AGGREGATE_ID
    assert mean.report.dice == pytest.approx(np.mean([row.report.dice for row in rows]))
    assert mean.report.hdb == pytest.approx(np.mean([rows[0].report.hdb, rows[1].report.hdb]))

    path = write_report(tmp_path / "report.csv", [*rows, mean])
    with open(path, newline="") as f:
        table = list(csv.reader(f))
    assert table[0] == REPORT_HEADER
    assert len(table) == 5
    assert table[3][-1] == "1" and table[3][REPORT_HEADER.index("hdb")] == "nan"
    assert table[1][REPORT_HEADER.index("dice")] == "1.000000"
