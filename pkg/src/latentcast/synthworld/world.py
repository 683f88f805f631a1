"""Procedural stochastic video world: layered 2.5D flat-shaded shapes.

Each clip is 16 frames (4 context + 12 future). Frames 1..4 depend only on
the world seed; at the branch frame every object independently resamples its
heading from a discrete, zero-mean set of rotations of its current velocity,
selected by the branch seed. Rendering is integer rasterization with a
per-pixel depth test; no anti-aliasing, no lighting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = ["WorldConfig", "Clip", "SceneState", "InvalidConfigError", "generate_clip", "build_scene", "annotate_tracks", "object_silhouette"]

CONTEXT_FRAMES = 4
SHAPE_KINDS = ("disk", "square", "triangle")


class InvalidConfigError(ValueError):
    """World configuration violates an invariant."""


@dataclass(frozen=True)
class WorldConfig:
    height: int = 64
    width: int = 64
    objects: int = 4
    shapes: tuple[str, ...] = SHAPE_KINDS
    z_min: float = 2.0
    z_max: float = 10.0
    speed_min: float = 1.0
    speed_max: float = 2.5
    radius_min: float = 6.0
    radius_max: float = 12.0
    branch_frame: int = 5
    branch_count: int = 4
    tracked_points: int = 16
    frames: int = 16
    background_cell: int = 8

    def validate(self):
        if self.frames != 16:
            raise InvalidConfigError("frames must be 16 (4 context + 12 future)")
        if self.branch_frame <= CONTEXT_FRAMES:
            raise InvalidConfigError("branch_frame must be > 4")
        if min(self.objects, self.tracked_points, self.branch_count) < 1:
            raise InvalidConfigError("objects, tracked_points and branch_count must be >= 1")
        if self.height < 8 or self.width < 8:
            raise InvalidConfigError("frame must be at least 8x8")
        if not 0 < self.z_min < self.z_max:
            raise InvalidConfigError("need 0 < z_min < z_max")
        if self.speed_min < 0 or self.speed_max < self.speed_min:
            raise InvalidConfigError("bad velocity range")
        if self.radius_min <= 0 or self.radius_max < self.radius_min:
            raise InvalidConfigError("bad radius range")
        if any(s not in SHAPE_KINDS for s in self.shapes) or not self.shapes:
            raise InvalidConfigError(f"shapes must be drawn from {SHAPE_KINDS}")
        return self

    def scaled(self, height: int, width: int) -> "WorldConfig":
        """Same world style at a different resolution (sizes/speeds scale)."""
        f = min(height, width) / min(self.height, self.width)
        return replace(
            self,
            height=height,
            width=width,
            speed_min=self.speed_min * f,
            speed_max=self.speed_max * f,
            radius_min=self.radius_min * f,
            radius_max=self.radius_max * f,
        )


@dataclass
class Clip:
    """A 16-frame clip with aligned ground truth at four abstraction levels."""

    rgb: np.ndarray          # [T, H, W, 3] in [0, 1]
    depth: np.ndarray        # [T, H, W] positive units, background at z_max
    track_xy: np.ndarray     # [Q, T, 2] pixel coordinates
    track_vis: np.ndarray    # [Q, T] {0, 1}
    box_xyxy: np.ndarray     # [K, T, 4] (x_min, y_min, x_max, y_max)
    box_present: np.ndarray  # [K, T] {0, 1}
    world_seed: int
    branch_seed: int

    def channels(self) -> dict[str, np.ndarray]:
        return {
            "rgb": self.rgb,
            "depth": self.depth,
            "track_xy": self.track_xy,
            "track_vis": self.track_vis,
            "box_xyxy": self.box_xyxy,
            "box_present": self.box_present,
        }

    def equals(self, other: "Clip") -> bool:
        a, b = self.channels(), other.channels()
        return all(np.array_equal(a[k], b[k]) for k in a)


@dataclass
class SceneState:
    """Everything needed to render and annotate one clip."""

    config: WorldConfig
    background: np.ndarray           # [H, W, 3]
    shapes: list[str]
    radii: np.ndarray                # [K]
    colors: np.ndarray               # [K, 3]
    depths: np.ndarray               # [K] strictly inside (z_min, z_max)
    centers: np.ndarray              # [T, K, 2] float (x, y)
    track_parent: np.ndarray         # [Q] object index
    track_offset: np.ndarray         # [Q, 2] offset from parent center
    owner: np.ndarray = field(default=None)  # [T, H, W] front-most object id, -1 = background


def _shape_mask(shape: str, cx: float, cy: float, r: float, height: int, width: int) -> np.ndarray:
    """Pixel-center coverage test for one convex shape."""
    ys = np.arange(height, dtype=np.float64) + 0.5
    xs = np.arange(width, dtype=np.float64) + 0.5
    dy = (ys - cy)[:, None]
    dx = (xs - cx)[None, :]
    if shape == "disk":
        return dx * dx + dy * dy <= r * r
    if shape == "square":
        return (np.abs(dx) <= r) & (np.abs(dy) <= r)
    if shape == "triangle":
        return _triangle_mask(dx, dy, r)
    raise InvalidConfigError(f"unknown shape {shape!r}")


def _triangle_mask(dx: np.ndarray, dy: np.ndarray, r: float) -> np.ndarray:
    # vertices at angles 90, 210, 330 degrees in screen coords (apex up)
    verts = [(r * math.cos(a), -r * math.sin(a)) for a in (math.pi / 2, math.pi * 7 / 6, math.pi * 11 / 6)]
    mask = np.ones(np.broadcast_shapes(dx.shape, dy.shape), dtype=bool)
    for i in range(3):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % 3]
        # interior lies to the left of each edge traversed counter-clockwise
        cross = (x1 - x0) * (dy - y0) - (y1 - y0) * (dx - x0)
        mask &= cross <= 0
    return mask


def _point_in_shape(shape: str, dx: float, dy: float, r: float) -> bool:
    if shape == "disk":
        return dx * dx + dy * dy <= r * r
    if shape == "square":
        return max(abs(dx), abs(dy)) <= r
    return bool(_triangle_mask(np.array([[dx]]), np.array([[dy]]), r).item())


def build_scene(world_seed: int, branch_seed: int, config: WorldConfig) -> SceneState:
    """Sample static scene properties and the full motion trajectory."""
    config.validate()
    cfg = config
    rng = np.random.default_rng(np.random.SeedSequence([world_seed & 0xFFFFFFFFFFFFFFFF]))

    # low-frequency blocky background, muted colors
    ch = (cfg.height + cfg.background_cell - 1) // cfg.background_cell
    cw = (cfg.width + cfg.background_cell - 1) // cfg.background_cell
    cells = 0.2 + 0.35 * rng.random((ch, cw, 3))
    background = np.repeat(np.repeat(cells, cfg.background_cell, axis=0), cfg.background_cell, axis=1)
    background = background[: cfg.height, : cfg.width].astype(np.float32)

    k = cfg.objects
    shapes = [cfg.shapes[int(rng.integers(len(cfg.shapes)))] for _ in range(k)]
    radii = rng.uniform(cfg.radius_min, cfg.radius_max, size=k)
    colors = (0.45 + 0.55 * rng.random((k, 3))).astype(np.float32)
    slot = rng.permutation(k)
    spacing = (cfg.z_max - cfg.z_min) / (k + 1)
    depths = cfg.z_min + spacing * (slot + 0.5 + 0.4 * (rng.random(k) - 0.5))

    pos0 = np.empty((k, 2))
    for i in range(k):
        m = radii[i] + 1.0
        pos0[i, 0] = rng.uniform(m, cfg.width - m) if cfg.width > 2 * m else cfg.width / 2
        pos0[i, 1] = rng.uniform(m, cfg.height - m) if cfg.height > 2 * m else cfg.height / 2
    speed = rng.uniform(cfg.speed_min, cfg.speed_max, size=k)
    ang = rng.uniform(0.0, 2.0 * math.pi, size=k)
    vel0 = np.stack([speed * np.cos(ang), speed * np.sin(ang)], axis=1)

    # tracked points: parent round-robin, offset rejection-sampled inside the shape
    q = cfg.tracked_points
    parent = np.array([i % k for i in range(q)], dtype=np.int64)
    offsets = np.zeros((q, 2))
    for i in range(q):
        p = parent[i]
        for _ in range(256):
            dx, dy = rng.uniform(-radii[p], radii[p], size=2)
            if _point_in_shape(shapes[p], dx, dy, radii[p] * 0.92):
                offsets[i] = (dx, dy)
                break

    # branch headings: rotate the pre-branch velocity by 2*pi*j/B, j chosen
    # per object by the branch stream; the set is exactly zero-mean for B >= 2
    branch_rng = np.random.default_rng(np.random.SeedSequence([world_seed & 0xFFFFFFFFFFFFFFFF, branch_seed & 0xFFFFFFFFFFFFFFFF]))
    picks = branch_rng.integers(cfg.branch_count, size=k)
    theta = 2.0 * math.pi * picks / cfg.branch_count
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    vel1 = np.stack(
        [vel0[:, 0] * cos_t - vel0[:, 1] * sin_t, vel0[:, 0] * sin_t + vel0[:, 1] * cos_t], axis=1
    )

    centers = np.empty((cfg.frames, k, 2))
    centers[0] = pos0
    for t in range(1, cfg.frames):
        v = vel1 if (t + 1) >= cfg.branch_frame else vel0  # frame numbers are 1-based
        centers[t] = centers[t - 1] + v

    return SceneState(
        config=cfg,
        background=background,
        shapes=shapes,
        radii=radii,
        colors=colors,
        depths=depths,
        centers=centers,
        track_parent=parent,
        track_offset=offsets,
    )


def object_silhouette(scene: SceneState, obj: int, t: int) -> np.ndarray:
    """Occlusion-ignorant coverage mask of one object at one frame."""
    cfg = scene.config
    cx, cy = scene.centers[t, obj]
    return _shape_mask(scene.shapes[obj], cx, cy, scene.radii[obj], cfg.height, cfg.width)


def _render(scene: SceneState) -> tuple[np.ndarray, np.ndarray]:
    cfg = scene.config
    t_n, k = cfg.frames, cfg.objects
    rgb = np.empty((t_n, cfg.height, cfg.width, 3), dtype=np.float32)
    depth = np.full((t_n, cfg.height, cfg.width), np.float32(cfg.z_max), dtype=np.float32)
    owner = np.full((t_n, cfg.height, cfg.width), -1, dtype=np.int64)
    order = np.argsort(-scene.depths)  # far to near (painter's order)
    for t in range(t_n):
        rgb[t] = scene.background
        for i in order:
            mask = object_silhouette(scene, int(i), t)
            if not mask.any():
                continue
            rgb[t][mask] = scene.colors[i]
            depth[t][mask] = np.float32(scene.depths[i])
            owner[t][mask] = i
    scene.owner = owner
    return rgb, depth


def annotate_tracks(scene: SceneState) -> tuple[np.ndarray, np.ndarray]:
    """Track points under rigid motion; visible = in frame and front-most."""
    cfg = scene.config
    if scene.owner is None:
        _render(scene)
    q, t_n = cfg.tracked_points, cfg.frames
    xy = np.empty((q, t_n, 2), dtype=np.float32)
    vis = np.zeros((q, t_n), dtype=np.float32)
    for i in range(q):
        p = int(scene.track_parent[i])
        pos = scene.centers[:, p, :] + scene.track_offset[i]
        xy[i] = pos.astype(np.float32)
        for t in range(t_n):
            x, y = pos[t]
            if 0.0 <= x < cfg.width and 0.0 <= y < cfg.height:
                if scene.owner[t, int(y), int(x)] == p:
                    vis[i, t] = 1.0
    return xy, vis


def _annotate_boxes(scene: SceneState) -> tuple[np.ndarray, np.ndarray]:
    """Tight axis-aligned hull of each object's own rendered pixels."""
    cfg = scene.config
    k, t_n = cfg.objects, cfg.frames
    boxes = np.zeros((k, t_n, 4), dtype=np.float32)
    present = np.zeros((k, t_n), dtype=np.float32)
    for i in range(k):
        for t in range(t_n):
            mask = object_silhouette(scene, i, t)
            if not mask.any():
                continue
            rows = np.flatnonzero(mask.any(axis=1))
            cols = np.flatnonzero(mask.any(axis=0))
            boxes[i, t] = (cols[0], rows[0], cols[-1] + 1, rows[-1] + 1)
            present[i, t] = 1.0
    return boxes, present


def generate_clip(world_seed: int, branch_seed: int, config: WorldConfig) -> Clip:
    """Deterministic clip for (world_seed, branch_seed, config)."""
    scene = build_scene(world_seed, branch_seed, config)
    rgb, depth = _render(scene)
    track_xy, track_vis = annotate_tracks(scene)
    box_xyxy, box_present = _annotate_boxes(scene)
    return Clip(
        rgb=rgb,
        depth=depth,
        track_xy=track_xy,
        track_vis=track_vis,
        box_xyxy=box_xyxy,
        box_present=box_present,
        world_seed=int(world_seed),
        branch_seed=int(branch_seed),
    )
