"""Lightweight attention readout heads decoding frozen latents to task outputs.

One head per (encoder, task). Queries cross-attend over the latent tokens of
all 16 frames; point and box queries are conditioned on frame-1 ground truth
(tracking convention), dense tasks use one learned query per output patch.
Box outputs use a center/size parameterization with softplus sizes, so
x_min <= x_max and y_min <= y_max hold by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import nn
from .. import numkit as nk
from ..backbones import LatentTrajectory, unpatchify

__all__ = ["TASKS", "ReadoutConfig", "ReadoutHead", "TaskQueries", "TaskOutput", "init_head", "decode", "decode_batch"]

TASKS = ("pixels", "depth", "points", "boxes")


@dataclass(frozen=True)
class ReadoutConfig:
    task: str
    frames: int
    height: int
    width: int
    patch: int
    latent_dim: int
    dim: int = 64
    blocks: int = 2
    heads: int = 1
    mlp_ratio: int = 2
    z_min: float = 1.0
    z_max: float = 10.0

    @property
    def tokens_per_frame(self) -> int:
        return (self.height // self.patch) * (self.width // self.patch)


@dataclass
class ReadoutHead:
    config: ReadoutConfig
    arrays: dict[str, np.ndarray]
    encoder_id: str
    trained: bool = False
    loss_trace: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class TaskQueries:
    """Frame-1 conditioning: query points for tracks, initial boxes for objects."""

    points_xy: np.ndarray | None = None  # [Q, 2] pixel coords
    boxes: np.ndarray | None = None      # [K, 4] pixel coords


@dataclass
class TaskOutput:
    task: str
    pixels: np.ndarray | None = None          # [T, H, W, 3]
    depth: np.ndarray | None = None           # [T, H, W]
    points_xy: np.ndarray | None = None       # [Q, T, 2]
    points_vis_logit: np.ndarray | None = None  # [Q, T]
    points_unc_logit: np.ndarray | None = None  # [Q, T]
    boxes: np.ndarray | None = None            # [K, T, 4]


def init_head(cfg: ReadoutConfig, encoder_id: str, seed: int) -> ReadoutHead:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 41]))
    params: nn.Params = {}
    nn.init_linear(params, "mem_proj", rng, cfg.latent_dim, cfg.dim)
    params["mem_temb"] = nk.param(0.02 * rng.standard_normal((cfg.frames, cfg.dim)).astype(np.float32))
    params["mem_pemb"] = nk.param(0.02 * rng.standard_normal((cfg.tokens_per_frame, cfg.dim)).astype(np.float32))
    params["q_temb"] = nk.param(0.02 * rng.standard_normal((cfg.frames, cfg.dim)).astype(np.float32))
    if cfg.task in ("pixels", "depth"):
        params["q_patch"] = nk.param(0.02 * rng.standard_normal((cfg.tokens_per_frame, cfg.dim)).astype(np.float32))
        out_dim = cfg.patch * cfg.patch * (3 if cfg.task == "pixels" else 1)
    elif cfg.task == "points":
        nn.init_linear(params, "q_embed", rng, 2, cfg.dim)
        out_dim = 4  # dx, dy, visibility logit, uncertainty logit
    elif cfg.task == "boxes":
        nn.init_linear(params, "q_embed", rng, 4, cfg.dim)
        out_dim = 4  # dcx, dcy, raw width, raw height
    else:
        raise ValueError(f"unknown task {cfg.task!r}")
    for i in range(cfg.blocks):
        nn.init_block(params, f"block{i}", rng, cfg.dim, cfg.mlp_ratio)
    nn.init_layer_norm(params, "out_ln", cfg.dim)
    nn.init_linear(params, "head", rng, cfg.dim, out_dim, zero=True)
    return ReadoutHead(config=cfg, arrays=nn.params_to_arrays(params), encoder_id=encoder_id)


def _norm_xy(cfg: ReadoutConfig, xy: np.ndarray) -> np.ndarray:
    return (np.asarray(xy, dtype=np.float32) / np.array([cfg.width, cfg.height], dtype=np.float32)).astype(np.float32)


def _norm_box(cfg: ReadoutConfig, box: np.ndarray) -> np.ndarray:
    scale = np.array([cfg.width, cfg.height, cfg.width, cfg.height], dtype=np.float32)
    return (np.asarray(box, dtype=np.float32) / scale).astype(np.float32)


def _inv_softplus(y: np.ndarray) -> np.ndarray:
    y = np.clip(np.asarray(y, dtype=np.float64), 1e-3, None)
    return (y + np.log1p(-np.exp(-y))).astype(np.float32)


def _frame1_patch_index(cfg: ReadoutConfig, xy: np.ndarray) -> np.ndarray:
    """Flat token index (frame 1) of the patch containing each pixel position."""
    gw, gh = cfg.width // cfg.patch, cfg.height // cfg.patch
    cx = np.clip(np.floor(xy[:, 0] / cfg.patch).astype(np.int64), 0, gw - 1)
    cy = np.clip(np.floor(xy[:, 1] / cfg.patch).astype(np.int64), 0, gh - 1)
    return cy * gw + cx


def _build_queries(params: nn.Params, cfg: ReadoutConfig, queries: list[TaskQueries], mem: nk.Tensor) -> nk.Tensor:
    """Per-frame query tokens [B*T, K, dim].

    Dense tasks start each query from its own projected memory token (direct
    content path). Point and box queries combine the frame-1 geometry with
    an appearance template: the frame-1 memory token at the query location,
    so within-frame cross-attention begins as template matching.
    """
    t, n = cfg.frames, cfg.tokens_per_frame
    b = mem.shape[0]
    temb = params["q_temb"]
    if cfg.task in ("pixels", "depth"):
        base = params["q_patch"].reshape(1, 1, n, cfg.dim) + temb.reshape(1, t, 1, cfg.dim)
        q = mem.reshape(b, t, n, cfg.dim) + base
        return q.reshape(b * t, n, cfg.dim)
    if cfg.task == "points":
        raw = np.stack([_norm_xy(cfg, tq.points_xy) for tq in queries])  # [B, K, 2]
        anchors = np.stack([tq.points_xy for tq in queries])
    else:
        raw = np.stack([_norm_box(cfg, tq.boxes) for tq in queries])     # [B, K, 4]
        boxes = np.stack([tq.boxes for tq in queries])
        anchors = np.stack([(boxes[..., 0] + boxes[..., 2]) / 2, (boxes[..., 1] + boxes[..., 3]) / 2], axis=-1)
    k = raw.shape[1]
    flat_idx = np.stack([_frame1_patch_index(cfg, anchors[i]) for i in range(b)])  # [B, K]
    b_idx = np.repeat(np.arange(b), k)
    template = mem[(b_idx, flat_idx.reshape(-1))].reshape(b, 1, k, cfg.dim)
    emb = nn.linear(params, "q_embed", nk.tensor(raw)).reshape(b, 1, k, cfg.dim)
    q = emb + template + temb.reshape(1, t, 1, cfg.dim)
    return q.reshape(b * t, k, cfg.dim)


def _forward(params: nn.Params, cfg: ReadoutConfig, tokens: np.ndarray, queries: list[TaskQueries]) -> nk.Tensor:
    """Raw head outputs for latent tokens [B, T, N, D].

    Returns [B, T*N, out] for dense tasks (frame-major) and [B, K*T, out]
    for points/boxes (entity-major), matching _assemble. The latent scale is
    O(1) by construction for every encoder variant, so the memory path is a
    plain linear projection (no normalization that would discard per-token
    mean/scale needed for dense reconstruction). Cross-attention is
    frame-aligned: queries for frame t attend to frame t's tokens, which
    turns tracking into within-frame template matching.
    """
    b, t, n, d = tokens.shape
    mem = nn.linear(params, "mem_proj", nk.tensor(tokens.reshape(b, t * n, d)))
    mem = mem.reshape(b, t, n, cfg.dim)
    mem = mem + params["mem_temb"].reshape(1, t, 1, cfg.dim)
    mem = mem + params["mem_pemb"].reshape(1, 1, n, cfg.dim)
    mem = mem.reshape(b, t * n, cfg.dim)
    q = _build_queries(params, cfg, queries, mem)       # [B*T, K, dim]
    k = q.shape[1]
    mem_local = mem.reshape(b, t, n, cfg.dim).reshape(b * t, n, cfg.dim)
    for i in range(cfg.blocks):
        q = nn.cross_attention_block(params, f"block{i}", q, mem_local, cfg.heads)
    out = nn.linear(params, "head", nn.layer_norm_layer(params, "out_ln", q))  # [B*T, K, out]
    out_dim = out.shape[-1]
    if cfg.task in ("pixels", "depth"):
        return out.reshape(b, t * n, out_dim)
    return out.reshape(b, t, k, out_dim).transpose((0, 2, 1, 3)).reshape(b, k * t, out_dim)


def _assemble(cfg: ReadoutConfig, raw: np.ndarray, tq: TaskQueries) -> TaskOutput:
    """Turn one example's raw head output into pixel-unit task arrays."""
    t, n = cfg.frames, cfg.tokens_per_frame
    if cfg.task == "pixels":
        frames = unpatchify(raw.reshape(t, n, -1), cfg.patch, cfg.height, cfg.width, 3)
        return TaskOutput(task="pixels", pixels=np.clip(frames, 0.0, 1.0))
    if cfg.task == "depth":
        frames = unpatchify(raw.reshape(t, n, -1), cfg.patch, cfg.height, cfg.width, 1)[..., 0]
        depth = cfg.z_min + frames.astype(np.float64) * (cfg.z_max - cfg.z_min)
        return TaskOutput(task="depth", depth=depth.astype(np.float32))
    if cfg.task == "points":
        k = tq.points_xy.shape[0]
        out = raw.reshape(k, t, 4)
        base = _norm_xy(cfg, tq.points_xy)[:, None, :]
        xy = (base + out[..., :2]) * np.array([cfg.width, cfg.height], dtype=np.float32)
        return TaskOutput(
            task="points",
            points_xy=xy.astype(np.float32),
            points_vis_logit=out[..., 2].astype(np.float32),
            points_unc_logit=out[..., 3].astype(np.float32),
        )
    k = tq.boxes.shape[0]
    out = raw.reshape(k, t, 4)
    base = _norm_box(cfg, tq.boxes)
    base_center = np.stack([(base[:, 0] + base[:, 2]) / 2, (base[:, 1] + base[:, 3]) / 2], axis=1)
    base_size = np.stack([base[:, 2] - base[:, 0], base[:, 3] - base[:, 1]], axis=1)
    center = base_center[:, None, :] + out[..., :2]
    # zero head output echoes the query box exactly; sizes stay nonnegative
    size = np.logaddexp(0.0, out[..., 2:] + _inv_softplus(base_size)[:, None, :])
    half = size / 2
    boxes_norm = np.stack(
        [center[..., 0] - half[..., 0], center[..., 1] - half[..., 1], center[..., 0] + half[..., 0], center[..., 1] + half[..., 1]],
        axis=-1,
    )
    scale = np.array([cfg.width, cfg.height, cfg.width, cfg.height], dtype=np.float32)
    return TaskOutput(task="boxes", boxes=(boxes_norm * scale).astype(np.float32))


def decode_batch(latents: list[LatentTrajectory], head: ReadoutHead, queries: list[TaskQueries]) -> list[TaskOutput]:
    """Deterministic decoding of a batch of latent trajectories."""
    if not head.trained:
        raise ValueError("decode: readout head has not been trained")
    if len(latents) != len(queries):
        raise ValueError("decode_batch: latents/queries length mismatch")
    cfg = head.config
    tokens = np.stack([traj.tokens for traj in latents]).astype(np.float32)
    params = nn.arrays_to_params(head.arrays)
    with nk.no_grad():
        raw = _forward(params, cfg, tokens, queries).data
    return [_assemble(cfg, raw[i], queries[i]) for i in range(len(queries))]


def decode(latents: LatentTrajectory, head: ReadoutHead, queries: TaskQueries | None = None) -> TaskOutput:
    """Decode one latent trajectory; works identically on real and forecast latents."""
    return decode_batch([latents], head, [queries or TaskQueries()])[0]
