"""Readout head training on frozen latents of real (observed) frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from .. import numkit as nk
from ..backbones import LatentTrajectory
from ..synthworld import Clip
from .heads import TASKS, ReadoutConfig, ReadoutHead, TaskQueries, _forward, _inv_softplus, _norm_box, _norm_xy, init_head
from ..backbones.encoder import patchify

__all__ = ["ReadoutSettings", "train_readout", "UNCERTAINTY_THRESHOLD_PX"]

UNCERTAINTY_THRESHOLD_PX = 4.0
VIS_LOSS_WEIGHT = 1.0
UNC_LOSS_WEIGHT = 0.5


@dataclass(frozen=True)
class ReadoutSettings:
    steps: int = 400
    batch: int = 8
    lr: float = 2e-3
    dim: int = 64
    blocks: int = 2
    heads: int = 1
    mlp_ratio: int = 2
    seed: int = 0
    log_every: int = 0


def _task_loss(params: nn.Params, cfg: ReadoutConfig, raw: nk.Tensor, clips: list[Clip], queries: list[TaskQueries]):
    b = len(clips)
    t, n = cfg.frames, cfg.tokens_per_frame
    if cfg.task == "pixels":
        target = np.stack([patchify(c.rgb, cfg.patch).reshape(t * n, -1) for c in clips])
        return nk.square(raw - nk.tensor(target.astype(np.float32))).mean()
    if cfg.task == "depth":
        norm = lambda d: (d - cfg.z_min) / (cfg.z_max - cfg.z_min)
        target = np.stack([patchify(norm(c.depth)[..., None], cfg.patch).reshape(t * n, -1) for c in clips])
        return nk.square(raw - nk.tensor(target.astype(np.float32))).mean()
    if cfg.task == "points":
        q = clips[0].track_xy.shape[0]
        out = raw.reshape(b, q, t, 4)
        base = np.stack([_norm_xy(cfg, tq.points_xy) for tq in queries])[:, :, None, :]
        pred_xy = out[..., :2] + nk.tensor(base)
        gt_xy = np.stack([_norm_xy(cfg, c.track_xy) for c in clips])        # [B, Q, T, 2]
        vis = np.stack([c.track_vis for c in clips]).astype(np.float32)     # [B, Q, T]
        pos_loss = nk.huber(pred_xy, gt_xy, delta=1.0 / cfg.width, weight=vis[..., None])
        vis_loss = nk.bce_with_logits(out[..., 2], vis)
        err_px = np.linalg.norm(
            (pred_xy.data - gt_xy) * np.array([cfg.width, cfg.height], dtype=np.float32), axis=-1
        )
        unc_target = (err_px > UNCERTAINTY_THRESHOLD_PX).astype(np.float32)  # from current predictions, detached
        unc_loss = nk.bce_with_logits(out[..., 3], unc_target, weight=vis)
        return pos_loss + VIS_LOSS_WEIGHT * vis_loss + UNC_LOSS_WEIGHT * unc_loss
    # boxes: L2 on corner coordinates via the center/softplus-size parameterization
    k = clips[0].box_xyxy.shape[0]
    out = raw.reshape(b, k, t, 4)
    base = np.stack([_norm_box(cfg, tq.boxes) for tq in queries])
    base_center = np.stack([(base[..., 0] + base[..., 2]) / 2, (base[..., 1] + base[..., 3]) / 2], axis=-1)
    base_size = np.stack([base[..., 2] - base[..., 0], base[..., 3] - base[..., 1]], axis=-1)
    center = out[..., :2] + nk.tensor(base_center[:, :, None, :])
    half = nk.softplus(out[..., 2:] + nk.tensor(_inv_softplus(base_size)[:, :, None, :])) * 0.5
    corners = nk.concat([center - half, center + half], axis=-1)
    gt = np.stack([_norm_box(cfg, c.box_xyxy) for c in clips]).astype(np.float32)  # [B, K, T, 4]
    present = np.stack([c.box_present for c in clips]).astype(np.float32)
    diff = nk.square(corners - nk.tensor(gt)) * nk.tensor(present[..., None])
    return diff.sum() / nk.tensor(np.float32(max(present.sum() * 4, 1.0)))


def train_readout(
    latents: list[LatentTrajectory],
    clips: list[Clip],
    task: str,
    settings: ReadoutSettings | None = None,
    head: ReadoutHead | None = None,
) -> ReadoutHead:
    """Fit one attention readout head; the result is frozen (immutable)."""
    if task not in TASKS:
        raise ValueError(f"train_readout: unknown task {task!r}")
    if head is not None and head.trained:
        raise ValueError("train_readout: head is frozen (already trained)")
    if len(latents) != len(clips) or not latents:
        raise ValueError("train_readout: latents/ground truth mismatch")
    if any(traj.source != "encoder" for traj in latents):
        raise ValueError("train_readout: refusing forecast latents as training data")
    settings = settings or ReadoutSettings()

    t, n, d = latents[0].tokens.shape
    h = clips[0].rgb.shape[1]
    w = clips[0].rgb.shape[2]
    patch = int(round((h * w / n) ** 0.5))
    cfg = ReadoutConfig(
        task=task,
        frames=t,
        height=h,
        width=w,
        patch=patch,
        latent_dim=d,
        dim=settings.dim,
        blocks=settings.blocks,
        heads=settings.heads,
        mlp_ratio=settings.mlp_ratio,
        z_min=float(min(c.depth.min() for c in clips)),
        z_max=float(max(c.depth.max() for c in clips)),
    )
    if head is None:
        head = init_head(cfg, latents[0].encoder_id, settings.seed)
    params = nn.arrays_to_params(head.arrays, trainable=True)
    ordered = [params[key] for key in sorted(params)]
    opt = nk.OptimizerState(lr=settings.lr)
    rng = np.random.default_rng(np.random.SeedSequence([settings.seed, 57]))
    tokens_all = np.stack([traj.tokens for traj in latents]).astype(np.float32)
    queries_all = [
        TaskQueries(points_xy=c.track_xy[:, 0].copy(), boxes=c.box_xyxy[:, 0].copy()) for c in clips
    ]

    trace = []
    for step in range(settings.steps):
        idx = rng.integers(len(clips), size=min(settings.batch, len(clips)))
        batch_clips = [clips[i] for i in idx]
        batch_queries = [queries_all[i] for i in idx]
        raw = _forward(params, head.config, tokens_all[idx], batch_queries)
        loss = _task_loss(params, head.config, raw, batch_clips, batch_queries)
        value = loss.item()
        if not np.isfinite(value):
            raise FloatingPointError(f"train_readout: non-finite loss at step {step} (task={task})")
        trace.append(value)
        for p in ordered:
            p.zero_grad()
        loss.backward()
        nk.adam_step(opt, ordered)
        if settings.log_every and step % settings.log_every == 0:
            print(f"[readout {task}] step {step} loss {value:.5f}")

    head.arrays = nn.params_to_arrays(params)
    head.loss_trace = trace
    head.trained = True
    return head
