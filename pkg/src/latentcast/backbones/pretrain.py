"""Masked-patch reconstruction pretraining for the mae encoder variants.

image-mae treats frames as independent images: per-frame random masking and
a per-frame decoder. video-mae trains on whole clips: the same spatial
positions are masked in every frame (tubes) and the decoder attends across
all frames, so the per-frame encoder is pushed toward features that support
cross-time reconstruction. Reconstruction loss covers all patches, so a
mask ratio of 0 degenerates to plain autoencoding. Only encoder weights
survive; the decoder is dropped at the end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from .. import numkit as nk
from ..synthworld import Dataset
from .encoder import EncoderSpec, _encoder_forward, _patch_dim, init_encoder_arrays, patchify

__all__ = ["PretrainSettings", "PretrainResult", "pretrain_encoder"]

ENCODER_KEYS_EXCLUDE = ("dec.", "mask_token")


@dataclass(frozen=True)
class PretrainSettings:
    batch: int = 8           # clips for video-mae, frames*8 for image-mae
    lr: float = 2e-3
    decoder_depth: int = 2
    log_every: int = 0


@dataclass
class PretrainResult:
    arrays: dict[str, np.ndarray]   # encoder weights only
    loss_trace: list[float]

    @property
    def initial_loss(self) -> float:
        return self.loss_trace[0]

    @property
    def final_loss(self) -> float:
        return float(np.mean(self.loss_trace[-10:]))


def _init_decoder(params: nn.Params, rng, spec: EncoderSpec, n_tok: int, frames: int, settings: PretrainSettings, temporal: bool):
    params["mask_token"] = nk.param(0.02 * rng.standard_normal((spec.dim,)).astype(np.float32))
    for i in range(settings.decoder_depth):
        nn.init_block(params, f"dec.block{i}", rng, spec.dim, spec.mlp_ratio)
    nn.init_layer_norm(params, "dec.ln", spec.dim)
    nn.init_linear(params, "dec.head", rng, spec.dim, _patch_dim(spec))
    if temporal:
        params["dec.temb"] = nk.param(0.02 * rng.standard_normal((frames, spec.dim)).astype(np.float32))
        params["dec.pemb"] = nk.param(0.02 * rng.standard_normal((n_tok, spec.dim)).astype(np.float32))


def _decoder_forward(params: nn.Params, spec: EncoderSpec, settings: PretrainSettings, tokens: nk.Tensor) -> nk.Tensor:
    for i in range(settings.decoder_depth):
        tokens = nn.transformer_block(params, f"dec.block{i}", tokens, spec.heads)
    return nn.linear(params, "dec.head", nn.layer_norm_layer(params, "dec.ln", tokens))


def pretrain_encoder(dataset: Dataset, spec: EncoderSpec, settings: PretrainSettings | None = None) -> PretrainResult:
    """Train an image-mae or video-mae encoder; returns frozen weights."""
    if spec.variant not in ("image-mae", "video-mae"):
        raise ValueError(f"pretrain_encoder: variant {spec.variant!r} is not pretrained")
    settings = settings or PretrainSettings()
    cfg = dataset.config
    n_tok = spec.tokens_per_frame(cfg.height, cfg.width)
    frames = cfg.frames

    params = nn.arrays_to_params(init_encoder_arrays(spec, cfg.height, cfg.width), trainable=True)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 23]))
    _init_decoder(params, rng, spec, n_tok, frames, settings, temporal=spec.variant == "video-mae")

    all_rgb = np.stack([c.rgb for c in dataset.clips])  # [C, T, H, W, 3]
    n_clips = all_rgb.shape[0]
    n_mask = int(round(spec.mask_ratio * n_tok))
    opt = nk.OptimizerState(lr=settings.lr)
    ordered = [params[k] for k in sorted(params)]
    trace: list[float] = []

    for step in range(spec.pretrain_steps):
        if spec.variant == "image-mae":
            ci = rng.integers(n_clips, size=settings.batch * 8)
            ti = rng.integers(frames, size=settings.batch * 8)
            batch = all_rgb[ci, ti]                       # [B, H, W, 3]
            patches = patchify(batch, spec.patch)
            mask = np.zeros((patches.shape[0], n_tok), dtype=bool)
            for row in mask:
                row[rng.permutation(n_tok)[:n_mask]] = True
            encoded = _encoder_forward(params, spec, nk.tensor(patches), mask if n_mask else None)
            recon = _decoder_forward(params, spec, settings, encoded)
        else:
            ci = rng.integers(n_clips, size=settings.batch)
            batch = all_rgb[ci].reshape(-1, cfg.height, cfg.width, 3)   # [B*T, H, W, 3]
            patches = patchify(batch, spec.patch)
            tube = np.zeros((settings.batch, n_tok), dtype=bool)
            for row in tube:
                row[rng.permutation(n_tok)[:n_mask]] = True
            mask = np.repeat(tube, frames, axis=0)        # same positions in every frame
            encoded = _encoder_forward(params, spec, nk.tensor(patches), mask if n_mask else None)
            seq = encoded.reshape(settings.batch, frames, n_tok, spec.dim)
            seq = seq + params["dec.temb"].reshape(1, frames, 1, spec.dim)
            seq = seq + params["dec.pemb"].reshape(1, 1, n_tok, spec.dim)
            seq = seq.reshape(settings.batch, frames * n_tok, spec.dim)
            recon = _decoder_forward(params, spec, settings, seq)
            patches = patches.reshape(settings.batch, frames * n_tok, -1)

        loss = nk.square(recon - nk.tensor(patches)).mean()
        value = loss.item()
        if not np.isfinite(value):
            raise FloatingPointError(f"pretrain_encoder: non-finite loss at step {step} (variant={spec.variant})")
        trace.append(value)
        for p in ordered:
            p.zero_grad()
        loss.backward()
        nk.adam_step(opt, ordered)
        if settings.log_every and step % settings.log_every == 0:
            print(f"[pretrain {spec.variant}] step {step} loss {value:.5f}")

    encoder_arrays = {
        k: v.data.astype(np.float32, copy=True)
        for k, v in params.items()
        if not any(k.startswith(p) or k == p for p in ENCODER_KEYS_EXCLUDE)
    }
    return PretrainResult(arrays=encoder_arrays, loss_trace=trace)
