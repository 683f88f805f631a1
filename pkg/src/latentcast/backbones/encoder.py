"""Frozen per-frame encoders spanning a quality spectrum.

Variants: random-frozen (seeded init, never trained), pixel-identity (fixed
seeded projection of raw patches), image-mae and video-mae (masked-patch
reconstruction pretraining; see pretrain.py). Every variant encodes frame t
from frame t alone; temporal information enters only through an additive
fixed sinusoidal per-frame embedding (pixel-identity stays a pure
projection).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import nn
from .. import numkit as nk
from ..synthworld import Clip

__all__ = ["EncoderSpec", "LatentTrajectory", "VARIANTS", "init_encoder_arrays", "encode", "encode_frames", "patchify", "unpatchify"]

VARIANTS = ("random-frozen", "pixel-identity", "image-mae", "video-mae")


@dataclass(frozen=True)
class EncoderSpec:
    variant: str
    patch: int = 8
    dim: int = 64
    depth: int = 4
    heads: int = 4
    mlp_ratio: int = 2
    mask_ratio: float = 0.75
    pretrain_steps: int = 600
    seed: int = 0

    def validate(self, height: int, width: int):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown encoder variant {self.variant!r}")
        if height % self.patch or width % self.patch:
            raise ValueError(f"frame {height}x{width} not divisible by patch {self.patch}")
        if not 0.0 <= self.mask_ratio < 1.0:
            raise ValueError("mask_ratio must be in [0, 1)")
        return self

    def tokens_per_frame(self, height: int, width: int) -> int:
        return (height // self.patch) * (width // self.patch)


@dataclass
class LatentTrajectory:
    """Per-frame token grids [T, N_tok, D] produced by a frozen encoder."""

    tokens: np.ndarray
    encoder_id: str
    normalized: bool = False
    source: str = "encoder"  # "encoder" for real frames, "forecast" for sampled latents

    def __post_init__(self):
        if self.tokens.ndim != 3:
            raise ValueError(f"latent tokens must be [T, N_tok, D], got {self.tokens.shape}")
        if not np.all(np.isfinite(self.tokens)):
            raise ValueError("latent tokens contain non-finite values")


def patchify(frames: np.ndarray, patch: int) -> np.ndarray:
    """[..., H, W, C] -> [..., N_tok, patch*patch*C], row-major patch order."""
    *lead, h, w, c = frames.shape
    gh, gw = h // patch, w // patch
    x = frames.reshape(*lead, gh, patch, gw, patch, c)
    x = np.moveaxis(x, -4, -3)  # [..., gh, gw, patch, patch, c]
    return x.reshape(*lead, gh * gw, patch * patch * c)


def unpatchify(tokens: np.ndarray, patch: int, height: int, width: int, channels: int) -> np.ndarray:
    """Inverse of patchify: [..., N_tok, patch*patch*C] -> [..., H, W, C]."""
    *lead, n, _ = tokens.shape
    gh, gw = height // patch, width // patch
    x = tokens.reshape(*lead, gh, gw, patch, patch, channels)
    x = np.moveaxis(x, -3, -4)  # [..., gh, patch, gw, patch, c]
    return x.reshape(*lead, height, width, channels)


def _patch_dim(spec: EncoderSpec) -> int:
    return spec.patch * spec.patch * 3


def init_encoder_arrays(spec: EncoderSpec, height: int, width: int) -> dict[str, np.ndarray]:
    """Seeded initial weights for a variant (the final weights for frozen ones)."""
    spec.validate(height, width)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 17]))
    n_tok = spec.tokens_per_frame(height, width)
    if spec.variant == "pixel-identity":
        gauss = rng.standard_normal((_patch_dim(spec), spec.dim))
        q, _ = np.linalg.qr(gauss)  # orthonormal columns: bias-free, well-conditioned
        return {"proj": q.astype(np.float32)}
    params: nn.Params = {}
    nn.init_linear(params, "embed", rng, _patch_dim(spec), spec.dim)
    params["pos"] = nk.param(0.02 * rng.standard_normal((n_tok, spec.dim)).astype(np.float32))
    for i in range(spec.depth):
        nn.init_block(params, f"block{i}", rng, spec.dim, spec.mlp_ratio)
    nn.init_layer_norm(params, "ln_out", spec.dim)
    return nn.params_to_arrays(params)


def _encoder_forward(params: nn.Params, spec: EncoderSpec, patches: nk.Tensor, mask: np.ndarray | None = None) -> nk.Tensor:
    """Shared ViT trunk on [B, N_tok, patch_dim] patch batches."""
    tokens = nn.linear(params, "embed", patches)
    if mask is not None:
        keep = nk.tensor((~mask).astype(np.float32)[..., None])
        tokens = tokens * keep + params["mask_token"] * nk.tensor(mask.astype(np.float32)[..., None])
    tokens = tokens + params["pos"]
    for i in range(spec.depth):
        tokens = nn.transformer_block(params, f"block{i}", tokens, spec.heads)
    return nn.layer_norm_layer(params, "ln_out", tokens)


def encode_frames(frames: np.ndarray, arrays: dict[str, np.ndarray], spec: EncoderSpec) -> np.ndarray:
    """Encode a frame batch [B, H, W, 3] to tokens [B, N_tok, D]. Pure."""
    b, h, w, _ = frames.shape
    spec.validate(h, w)
    patches = patchify(frames.astype(np.float32), spec.patch)
    if spec.variant == "pixel-identity":
        return patches @ arrays["proj"]
    params = {k: nk.tensor(v) for k, v in arrays.items() if k != "mask_token"}
    with nk.no_grad():
        out = _encoder_forward(params, spec, nk.tensor(patches))
    return out.data


def encode(clip: Clip, arrays: dict[str, np.ndarray], spec: EncoderSpec, encoder_id: str | None = None) -> LatentTrajectory:
    """Deterministic frozen encoding of one clip to [T, N_tok, D]."""
    tokens = encode_frames(clip.rgb, arrays, spec)
    if spec.variant != "pixel-identity":
        t = clip.rgb.shape[0]
        temb = nn.sinusoidal_embedding(np.arange(t), spec.dim)
        tokens = tokens + temb[:, None, :]
    return LatentTrajectory(
        tokens=tokens.astype(np.float32),
        encoder_id=encoder_id or spec.variant,
    )
