"""Per-channel standardization of frozen latents.

Channel moments are fitted on the forecaster-training split only; the
transformation is invertible given the stats. Standardized latents are what
the forecaster trains and samples in.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .encoder import LatentTrajectory

__all__ = ["NormStats", "compute_norm_stats", "normalize", "denormalize"]

MIN_STD = 1e-6


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray  # [D]
    std: np.ndarray   # [D], clamped away from zero


def compute_norm_stats(latents: Sequence[LatentTrajectory]) -> NormStats:
    """Per-channel mean/std over every token of the given trajectories."""
    if not latents:
        raise ValueError("compute_norm_stats: empty latent set")
    stacked = np.concatenate([traj.tokens.reshape(-1, traj.tokens.shape[-1]) for traj in latents], axis=0)
    mean = stacked.mean(axis=0, dtype=np.float64)
    std = stacked.std(axis=0, dtype=np.float64)
    flat = std < MIN_STD
    if flat.any():
        warnings.warn(f"compute_norm_stats: {int(flat.sum())} zero-variance channels clamped to {MIN_STD}")
        std = np.where(flat, MIN_STD, std)
    return NormStats(mean=mean.astype(np.float32), std=std.astype(np.float32))


def normalize(traj: LatentTrajectory, stats: NormStats) -> LatentTrajectory:
    if traj.normalized:
        raise ValueError("normalize: trajectory already normalized")
    tokens = (traj.tokens - stats.mean) / stats.std
    return replace(traj, tokens=tokens.astype(np.float32), normalized=True)


def denormalize(traj: LatentTrajectory, stats: NormStats) -> LatentTrajectory:
    if not traj.normalized:
        raise ValueError("denormalize: trajectory is not normalized")
    tokens = traj.tokens * stats.std + stats.mean
    return replace(traj, tokens=tokens.astype(np.float32), normalized=False)
