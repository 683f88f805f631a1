"""Per-example task metrics and sample statistics.

All math here runs in float64. Metrics that are undefined for an input
(e.g. no visible ground-truth point) return None and are reported as
missing rather than fabricated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "psnr",
    "abs_rel",
    "iou",
    "track_iou",
    "average_jaccard",
    "per_example_stats",
    "SampleStats",
    "correlation",
    "CorrelationResult",
    "JACCARD_THRESHOLDS",
    "REFERENCE_RESOLUTION",
]

JACCARD_THRESHOLDS = (1.0, 2.0, 4.0, 8.0, 16.0)
REFERENCE_RESOLUTION = 256.0


def psnr(pred: np.ndarray, gt: np.ndarray) -> float:
    """10*log10(1/MSE) over all pixels and frames; inf when identical."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"psnr: shape mismatch {pred.shape} vs {gt.shape}")
    mse = float(np.mean((pred - gt) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def abs_rel(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean absolute relative depth error |pred - gt| / gt."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"abs_rel: shape mismatch {pred.shape} vs {gt.shape}")
    if np.any(gt <= 0):
        raise ValueError("abs_rel: ground-truth depth must be positive everywhere")
    return float(np.mean(np.abs(pred - gt) / gt))


def iou(box_a, box_b) -> float:
    """Intersection over union of two (x_min, y_min, x_max, y_max) boxes."""
    ax0, ay0, ax1, ay1 = (float(v) for v in box_a)
    bx0, by0, bx1, by1 = (float(v) for v in box_b)
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def track_iou(pred_boxes: np.ndarray, gt_boxes: np.ndarray, gt_present: np.ndarray | None = None) -> float | None:
    """Mean IoU over the frames of one box trajectory.

    Frames where the ground-truth box is absent are skipped; all-absent
    trajectories are undefined.
    """
    pred_boxes = np.asarray(pred_boxes, dtype=np.float64)
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64)
    t = pred_boxes.shape[0]
    mask = np.ones(t, dtype=bool) if gt_present is None else np.asarray(gt_present, dtype=np.float64) > 0
    if not mask.any():
        return None
    vals = [iou(pred_boxes[i], gt_boxes[i]) for i in range(t) if mask[i]]
    return float(np.mean(vals))


def average_jaccard(
    pred_xy: np.ndarray,
    pred_vis: np.ndarray,
    gt_xy: np.ndarray,
    gt_vis: np.ndarray,
    width: float,
    height: float,
) -> float | None:
    """Average Jaccard over pixel thresholds {1,2,4,8,16} at 256-px scale.

    Per threshold: TP = both visible and within distance; FP = predicted
    visible but wrong (gt invisible or too far); FN = gt visible but missed.
    Counts aggregate over points and frames. Undefined when no ground-truth
    point is visible anywhere.
    """
    pred_xy = np.asarray(pred_xy, dtype=np.float64)
    gt_xy = np.asarray(gt_xy, dtype=np.float64)
    pred_vis = np.asarray(pred_vis).astype(bool)
    gt_vis = np.asarray(gt_vis).astype(bool)
    if pred_xy.shape != gt_xy.shape or pred_vis.shape != gt_vis.shape:
        raise ValueError("average_jaccard: shape mismatch")
    if not gt_vis.any():
        return None
    scale = np.array([REFERENCE_RESOLUTION / width, REFERENCE_RESOLUTION / height])
    dist = np.linalg.norm((pred_xy - gt_xy) * scale, axis=-1)
    jaccards = []
    for delta in JACCARD_THRESHOLDS:
        close = dist <= delta
        tp = int(np.sum(pred_vis & gt_vis & close))
        fp = int(np.sum(pred_vis & ~(gt_vis & close)))
        fn = int(np.sum(gt_vis & ~(pred_vis & close)))
        denom = tp + fp + fn
        jaccards.append(tp / denom if denom else 0.0)
    return float(np.mean(jaccards))


@dataclass(frozen=True)
class SampleStats:
    mean: float
    std: float
    min: float
    max: float


def per_example_stats(values) -> SampleStats:
    """Mean/std/min/max over one example's per-sample metric values.

    Population (n) denominator for the standard deviation.
    """
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size < 1:
        raise ValueError("per_example_stats: need at least one sample")
    return SampleStats(
        mean=float(arr.mean()),
        std=float(arr.std()),
        min=float(arr.min()),
        max=float(arr.max()),
    )


@dataclass(frozen=True)
class CorrelationResult:
    pearson_r: float | None
    spearman_rho: float | None


def _rank_average_ties(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=np.float64)
    i = 0
    sorted_v = v[order]
    while i < len(v):
        j = i
        while j + 1 < len(v) and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    xc = x - x.mean()
    yc = y - y.mean()
    den = math.sqrt(float(np.sum(xc * xc)) * float(np.sum(yc * yc)))
    if den == 0.0:
        return None
    return float(np.sum(xc * yc) / den)


def correlation(perception_scores, forecasting_scores) -> CorrelationResult:
    """Pearson and Spearman coefficients over paired per-model scores.

    Lower-is-better metrics must be negated by the caller before pairing.
    Fewer than 3 points or a zero-variance input is undefined.
    """
    x = np.asarray(list(perception_scores), dtype=np.float64)
    y = np.asarray(list(forecasting_scores), dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("correlation: paired inputs must have equal length")
    if x.size < 3:
        return CorrelationResult(None, None)
    pearson = _pearson(x, y)
    spearman = _pearson(_rank_average_ties(x), _rank_average_ties(y))
    return CorrelationResult(pearson, spearman)
