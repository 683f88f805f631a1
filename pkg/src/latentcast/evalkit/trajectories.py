"""Trajectory vectorization, completeness filtering, and temporal variance.

Task outputs over the 12 future frames become fixed-size vectors: 24 dims
for point tracks (2 coords x 12), 48 for boxes (4 coords x 12), and 2352
for pixels/depth (12 frames pooled to 14x14 patch means, channel-averaged
for pixels). The layout is frame-major, so a vector reshapes to
[12, dims/12].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TypeVar

import numpy as np

__all__ = [
    "FUTURE_FRAMES",
    "POOL_GRID",
    "TASK_DIMS",
    "TrajectoryVector",
    "vectorize",
    "vectorize_points",
    "vectorize_boxes",
    "vectorize_dense",
    "filter_complete",
    "temporal_variance",
]

FUTURE_FRAMES = 12
POOL_GRID = 14
TASK_DIMS = {"points": 24, "boxes": 48, "pixels": 2352, "depth": 2352}

T = TypeVar("T")


@dataclass(frozen=True)
class TrajectoryVector:
    task: str
    values: np.ndarray  # float64, TASK_DIMS[task] entries

    def __post_init__(self):
        if self.values.shape != (TASK_DIMS[self.task],):
            raise ValueError(f"{self.task} vector must have {TASK_DIMS[self.task]} dims, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("trajectory vector has non-finite entries")


def vectorize_points(xy: np.ndarray) -> TrajectoryVector:
    """[12, 2] future positions -> 24-dim vector."""
    xy = np.asarray(xy, dtype=np.float64)
    if xy.shape != (FUTURE_FRAMES, 2):
        raise ValueError(f"vectorize_points: expected [{FUTURE_FRAMES}, 2], got {xy.shape}")
    return TrajectoryVector("points", xy.reshape(-1).copy())


def vectorize_boxes(boxes: np.ndarray) -> TrajectoryVector:
    """[12, 4] future boxes -> 48-dim vector."""
    boxes = np.asarray(boxes, dtype=np.float64)
    if boxes.shape != (FUTURE_FRAMES, 4):
        raise ValueError(f"vectorize_boxes: expected [{FUTURE_FRAMES}, 4], got {boxes.shape}")
    return TrajectoryVector("boxes", boxes.reshape(-1).copy())


def _adaptive_pool(frame: np.ndarray, grid: int = POOL_GRID) -> np.ndarray:
    """Average-pool [H, W] to [grid, grid] with fractional bins."""
    h, w = frame.shape
    out = np.empty((grid, grid), dtype=np.float64)
    row_edges = [(int(np.floor(i * h / grid)), max(int(np.ceil((i + 1) * h / grid)), int(np.floor(i * h / grid)) + 1)) for i in range(grid)]
    col_edges = [(int(np.floor(j * w / grid)), max(int(np.ceil((j + 1) * w / grid)), int(np.floor(j * w / grid)) + 1)) for j in range(grid)]
    for i, (r0, r1) in enumerate(row_edges):
        for j, (c0, c1) in enumerate(col_edges):
            out[i, j] = frame[r0:r1, c0:c1].mean()
    return out


def vectorize_dense(frames: np.ndarray, task: str) -> TrajectoryVector:
    """[12, H, W] depth or [12, H, W, 3] pixels -> 2352-dim pooled vector."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[0] != FUTURE_FRAMES:
        raise ValueError(f"vectorize_dense: expected {FUTURE_FRAMES} frames, got {frames.shape[0]}")
    if task == "pixels":
        if frames.ndim != 4:
            raise ValueError("pixels trajectories are [12, H, W, 3]")
        frames = frames.mean(axis=-1)  # channel-averaged: one value per patch
    elif task == "depth":
        if frames.ndim != 3:
            raise ValueError("depth trajectories are [12, H, W]")
    else:
        raise ValueError(f"vectorize_dense: unknown task {task!r}")
    pooled = np.stack([_adaptive_pool(frames[t]) for t in range(FUTURE_FRAMES)])
    return TrajectoryVector(task, pooled.reshape(-1))


def vectorize(task: str, trajectory: np.ndarray) -> TrajectoryVector:
    if task == "points":
        return vectorize_points(trajectory)
    if task == "boxes":
        return vectorize_boxes(trajectory)
    if task in ("pixels", "depth"):
        return vectorize_dense(trajectory, task)
    raise ValueError(f"vectorize: unknown task {task!r}")


def filter_complete(trajectories: Sequence[T], present: np.ndarray) -> list[T]:
    """Keep trajectories whose presence mask holds in every future frame.

    present: [n, 12] flags (visibility for points, box presence for boxes).
    Order is preserved.
    """
    present = np.asarray(present, dtype=np.float64) > 0
    if present.ndim != 2 or present.shape[0] != len(trajectories) or present.shape[1] != FUTURE_FRAMES:
        raise ValueError(f"filter_complete: present must be [n, {FUTURE_FRAMES}]")
    keep = present.all(axis=1)
    return [t for t, k in zip(trajectories, keep) if k]


def temporal_variance(vectors, task: str) -> float:
    """Population variance across the 12 time steps, averaged over every
    other dimension and over trajectories."""
    rows = [v.values if isinstance(v, TrajectoryVector) else np.asarray(v, dtype=np.float64) for v in vectors]
    if not rows:
        raise ValueError("temporal_variance: empty trajectory set")
    arr = np.stack(rows).astype(np.float64)
    d = TASK_DIMS[task]
    if arr.shape[1] != d:
        raise ValueError(f"temporal_variance: {task} vectors must have {d} dims")
    per_time = arr.reshape(arr.shape[0], FUTURE_FRAMES, d // FUTURE_FRAMES)
    return float(per_time.var(axis=1).mean())
