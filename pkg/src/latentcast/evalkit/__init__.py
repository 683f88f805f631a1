"""Distributional evaluation: task metrics, Gaussian fits, Frechet distance."""

from .gaussian import SHRINKAGE_FLOOR, SHRINKAGE_RELATIVE, GaussianSummary, fit_gaussian, frechet_distance
from .metrics import (
    JACCARD_THRESHOLDS,
    REFERENCE_RESOLUTION,
    CorrelationResult,
    SampleStats,
    abs_rel,
    average_jaccard,
    correlation,
    iou,
    per_example_stats,
    psnr,
    track_iou,
)
from .trajectories import (
    FUTURE_FRAMES,
    POOL_GRID,
    TASK_DIMS,
    TrajectoryVector,
    filter_complete,
    temporal_variance,
    vectorize,
    vectorize_boxes,
    vectorize_dense,
    vectorize_points,
)

__all__ = [
    "GaussianSummary",
    "fit_gaussian",
    "frechet_distance",
    "SHRINKAGE_RELATIVE",
    "SHRINKAGE_FLOOR",
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
    "TrajectoryVector",
    "vectorize",
    "vectorize_points",
    "vectorize_boxes",
    "vectorize_dense",
    "filter_complete",
    "temporal_variance",
    "TASK_DIMS",
    "FUTURE_FRAMES",
    "POOL_GRID",
]
