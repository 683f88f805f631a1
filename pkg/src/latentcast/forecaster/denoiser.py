"""Transformer denoiser over the joint 16-frame token sequence.

Clean context tokens (frames 1-4) and noisy future tokens (frames 5-16)
share one sequence; segment, frame, and patch embeddings mark who is who,
and a learned timestep embedding (row 0 reserved for the regression
baseline) is added to every token. The output projection is zero-initialized
so an untrained model predicts zero noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from .. import numkit as nk

__all__ = ["DenoiserSpec", "init_denoiser_arrays", "denoiser_forward"]

CONTEXT_FRAMES = 4


@dataclass(frozen=True)
class DenoiserSpec:
    latent_dim: int
    tokens_per_frame: int
    frames: int = 16
    dim: int = 64
    depth: int = 3
    heads: int = 1
    mlp_ratio: int = 4
    schedule_steps: int = 200
    seed: int = 0

    @property
    def future_frames(self) -> int:
        return self.frames - CONTEXT_FRAMES

    def validate(self):
        if self.frames <= CONTEXT_FRAMES:
            raise ValueError("DenoiserSpec: need more frames than context")
        if self.dim % self.heads:
            raise ValueError("DenoiserSpec: dim must divide heads")
        return self


def init_denoiser_arrays(spec: DenoiserSpec) -> dict[str, np.ndarray]:
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 97]))
    params: nn.Params = {}
    nn.init_linear(params, "in_proj", rng, spec.latent_dim, spec.dim)
    params["frame_emb"] = nk.param(0.02 * rng.standard_normal((spec.frames, spec.dim)).astype(np.float32))
    params["patch_emb"] = nk.param(0.02 * rng.standard_normal((spec.tokens_per_frame, spec.dim)).astype(np.float32))
    params["segment_emb"] = nk.param(0.02 * rng.standard_normal((2, spec.dim)).astype(np.float32))
    params["step_emb"] = nk.param(0.02 * rng.standard_normal((spec.schedule_steps + 1, spec.dim)).astype(np.float32))
    for i in range(spec.depth):
        nn.init_block(params, f"block{i}", rng, spec.dim, spec.mlp_ratio)
    nn.init_layer_norm(params, "ln_out", spec.dim)
    nn.init_linear(params, "out_proj", rng, spec.dim, spec.latent_dim, zero=True)
    return nn.params_to_arrays(params)


def denoiser_forward(params: nn.Params, spec: DenoiserSpec, tokens: nk.Tensor, step_index: np.ndarray) -> nk.Tensor:
    """tokens [B, frames, N, latent_dim] -> prediction for the future frames
    [B, future, N, latent_dim]. step_index: [B] ints (0 = regression mode)."""
    b = tokens.shape[0]
    t, n = spec.frames, spec.tokens_per_frame
    x = nn.linear(params, "in_proj", tokens.reshape(b, t * n, spec.latent_dim))
    x = x.reshape(b, t, n, spec.dim)
    x = x + params["frame_emb"].reshape(1, t, 1, spec.dim)
    x = x + params["patch_emb"].reshape(1, 1, n, spec.dim)
    segment = np.zeros((1, t, 1, 1), dtype=np.int64)
    segment[0, CONTEXT_FRAMES:] = 1
    x = x + nk.embedding(params["segment_emb"], segment[0, :, :, 0]).reshape(1, t, 1, spec.dim)
    step_tok = nk.embedding(params["step_emb"], np.asarray(step_index, dtype=np.int64))
    x = x + step_tok.reshape(b, 1, 1, spec.dim)
    x = x.reshape(b, t * n, spec.dim)
    for i in range(spec.depth):
        x = nn.transformer_block(params, f"block{i}", x, spec.heads)
    out = nn.linear(params, "out_proj", nn.layer_norm_layer(params, "ln_out", x))
    out = out.reshape(b, t, n, spec.latent_dim)
    return out[:, CONTEXT_FRAMES:]
