"""Synthetic branching video world with pixel/depth/track/box ground truth."""

from .dataset import Dataset, DatasetFormatError, generate_dataset, read_dataset, regenerate_dataset, write_dataset
from .world import (
    CONTEXT_FRAMES,
    Clip,
    InvalidConfigError,
    SceneState,
    WorldConfig,
    annotate_tracks,
    build_scene,
    generate_clip,
    object_silhouette,
)

__all__ = [
    "CONTEXT_FRAMES",
    "Clip",
    "Dataset",
    "DatasetFormatError",
    "InvalidConfigError",
    "SceneState",
    "WorldConfig",
    "annotate_tracks",
    "build_scene",
    "generate_clip",
    "generate_dataset",
    "object_silhouette",
    "read_dataset",
    "regenerate_dataset",
    "write_dataset",
]
