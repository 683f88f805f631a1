"""Conditional latent diffusion forecaster plus a regression baseline."""

from .denoiser import CONTEXT_FRAMES, DenoiserSpec, denoiser_forward, init_denoiser_arrays
from .sample import ForecastSampleSet, regress, sample
from .schedule import NoiseSchedule, q_sample
from .train import LatentBatch, TrainResult, TrainSettings, split_context_future, train_diffusion, train_regression

__all__ = [
    "CONTEXT_FRAMES",
    "DenoiserSpec",
    "denoiser_forward",
    "init_denoiser_arrays",
    "ForecastSampleSet",
    "sample",
    "regress",
    "NoiseSchedule",
    "q_sample",
    "LatentBatch",
    "TrainResult",
    "TrainSettings",
    "split_context_future",
    "train_diffusion",
    "train_regression",
]
