"""Detection evaluation: IoU matching, precision/recall/F1, sweeps, AP50.

Matching is the standard greedy confidence-ordered one-to-one scheme; an
exhaustive assignment oracle lives in the test suite for cross-checking on
small instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import greedy_assign, iou_matrix
from .dataset import BBox
from .detector import Detection

DEFAULT_IOU_THRESHOLD = 0.5
DEFAULT_SWEEP_GRID = tuple(round(0.01 * i, 2) for i in range(101))


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = ix * iy if ix > 0 and iy > 0 else 0.0
    return inter / (a.w * a.h + b.w * b.h - inter)


@dataclass
class MatchResult:
    """One-to-one matching between predictions and ground truth boxes."""

    pairs: list[tuple[int, int, float]]  # (prediction idx, truth idx, IoU)
    unmatched_predictions: list[int]
    unmatched_truths: list[int]

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def fp(self) -> int:
        return len(self.unmatched_predictions)

    @property
    def fn(self) -> int:
        return len(self.unmatched_truths)


def _boxes_array(boxes: list[BBox]) -> np.ndarray:
    return np.array([[b.x, b.y, b.w, b.h] for b in boxes], dtype=np.float64).reshape(
        len(boxes), 4
    )


def match(
    predictions: list[Detection],
    truths: list[BBox],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> MatchResult:
    """Greedily match predictions (confidence-descending) to truth boxes.

    Each prediction takes the unmatched truth with the highest IoU >=
    iou_threshold; IoU ties break to the lower truth index. Equal
    confidences are ordered by box coordinates so the result does not
    depend on input order.
    """
    if not predictions or not truths:
        return MatchResult(
            pairs=[],
            unmatched_predictions=list(range(len(predictions))),
            unmatched_truths=list(range(len(truths))),
        )

    order = sorted(
        range(len(predictions)),
        key=lambda i: (
            -predictions[i].confidence,
            predictions[i].bbox.x,
            predictions[i].bbox.y,
            predictions[i].bbox.w,
            predictions[i].bbox.h,
        ),
    )
    ious = iou_matrix(
        _boxes_array([p.bbox for p in predictions]), _boxes_array(truths)
    )
    assigned = greedy_assign(ious, np.asarray(order, dtype=np.int64), iou_threshold)

    pairs = []
    for p in order:
        j = int(assigned[p])
        if j >= 0:
            pairs.append((p, j, float(ious[p, j])))
    matched_truths = {j for _, j, _ in pairs}
    return MatchResult(
        pairs=pairs,
        unmatched_predictions=[i for i in range(len(predictions)) if int(assigned[i]) < 0],
        unmatched_truths=[j for j in range(len(truths)) if j not in matched_truths],
    )


@dataclass(frozen=True)
class MetricSummary:
    precision: float
    recall: float
    f1: float
    precision_defined: bool = True
    recall_defined: bool = True


def metrics_from_counts(tp: int, fp: int, fn: int) -> MetricSummary:
    """Precision/recall/F1 from raw counts; zero denominators yield 0, flagged."""
    p_defined = tp + fp > 0
    r_defined = tp + fn > 0
    precision = tp / (tp + fp) if p_defined else 0.0
    recall = tp / (tp + fn) if r_defined else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricSummary(precision, recall, f1, p_defined, r_defined)


def metrics(result: MatchResult, truth_count: int) -> MetricSummary:
    tp = result.tp
    return metrics_from_counts(tp, result.fp, truth_count - tp)


def match_dataset(
    predictions_by_image: dict[str, list[Detection]],
    truths_by_image: dict[str, list[BBox]],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> tuple[int, int, int]:
    """Aggregate (tp, fp, fn) over a set of images matched independently."""
    tp = fp = fn = 0
    for image_id in set(predictions_by_image) | set(truths_by_image):
        preds = predictions_by_image.get(image_id, [])
        truths = truths_by_image.get(image_id, [])
        result = match(preds, truths, iou_threshold)
        tp += result.tp
        fp += result.fp
        fn += result.fn
    return tp, fp, fn


@dataclass(frozen=True)
class MetricPoint:
    threshold: float
    precision: float
    recall: float
    f1: float


@dataclass
class SweepResult:
    points: list[MetricPoint]
    best: MetricPoint = field(init=False)

    def __post_init__(self) -> None:
        # argmax F1, ties to the lower threshold
        self.best = max(self.points, key=lambda m: (m.f1, -m.threshold))


def f1_sweep(
    predictions_by_image: dict[str, list[Detection]],
    truths_by_image: dict[str, list[BBox]],
    thresholds: tuple[float, ...] = DEFAULT_SWEEP_GRID,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> SweepResult:
    """Metrics at each confidence cutoff (predictions below the cutoff dropped)."""
    if not thresholds:
        raise ValueError("threshold grid must be nonempty")
    if list(thresholds) != sorted(thresholds):
        raise ValueError("threshold grid must be ascending")

    points = []
    for t in thresholds:
        kept = {
            image_id: [p for p in preds if p.confidence >= t]
            for image_id, preds in predictions_by_image.items()
        }
        tp, fp, fn = match_dataset(kept, truths_by_image, iou_threshold)
        m = metrics_from_counts(tp, fp, fn)
        points.append(MetricPoint(t, m.precision, m.recall, m.f1))
    return SweepResult(points)


def average_precision(
    predictions_by_image: dict[str, list[Detection]],
    truths_by_image: dict[str, list[BBox]],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> float:
    """AP at the given IoU via all-points interpolation of the PR curve.

    Single-category detection, so this equals mAP at that IoU.
    """
    truth_count = sum(len(v) for v in truths_by_image.values())
    if truth_count == 0:
        return 0.0

    # Score each prediction TP/FP once, under matching with all predictions
    # present, then accumulate in global confidence order.
    scored: list[tuple[float, bool]] = []
    for image_id, preds in predictions_by_image.items():
        truths = truths_by_image.get(image_id, [])
        result = match(preds, truths, iou_threshold)
        matched = {i for i, _, _ in result.pairs}
        for i, p in enumerate(preds):
            scored.append((p.confidence, i in matched))
    if not scored:
        return 0.0
    scored.sort(key=lambda s: -s[0])

    tps = np.cumsum([1.0 if hit else 0.0 for _, hit in scored])
    fps = np.cumsum([0.0 if hit else 1.0 for _, hit in scored])
    recalls = tps / truth_count
    precisions = tps / (tps + fps)

    # All-points interpolation: area under precision envelope.
    recalls = np.concatenate(([0.0], recalls, [recalls[-1]]))
    precisions = np.concatenate(([0.0], precisions, [0.0]))
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    ap = 0.0
    for i in range(1, len(recalls)):
        ap += (recalls[i] - recalls[i - 1]) * precisions[i]
    return float(ap)
