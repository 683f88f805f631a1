"""Frozen encoder variants, masked pretraining, latent normalization."""

from .encoder import (
    VARIANTS,
    EncoderSpec,
    LatentTrajectory,
    encode,
    encode_frames,
    init_encoder_arrays,
    patchify,
    unpatchify,
)
from .normalize import NormStats, compute_norm_stats, denormalize, normalize
from .pretrain import PretrainResult, PretrainSettings, pretrain_encoder

__all__ = [
    "VARIANTS",
    "EncoderSpec",
    "LatentTrajectory",
    "encode",
    "encode_frames",
    "init_encoder_arrays",
    "patchify",
    "unpatchify",
    "NormStats",
    "compute_norm_stats",
    "normalize",
    "denormalize",
    "PretrainResult",
    "PretrainSettings",
    "pretrain_encoder",
]
