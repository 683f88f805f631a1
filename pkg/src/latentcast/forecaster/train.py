"""Diffusion (epsilon-prediction) and deterministic regression training.

Both consume standardized latents only; the conditional denoiser sees clean
context frames and noisy futures, the regression baseline sees clean context
and zeroed futures and regresses the true future latents with L2. Losses
are reported per dimension, so an untrained (zero-output) model scores
about 1.0 on either objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from .. import numkit as nk
from ..backbones import LatentTrajectory
from .denoiser import CONTEXT_FRAMES, DenoiserSpec, denoiser_forward, init_denoiser_arrays
from .schedule import NoiseSchedule, q_sample

__all__ = ["LatentBatch", "TrainSettings", "TrainResult", "split_context_future", "train_diffusion", "train_regression"]


@dataclass(frozen=True)
class LatentBatch:
    """Stacked latent tokens plus the normalization flag they were built with."""

    tokens: np.ndarray  # [B, T', N, D]
    normalized: bool

    def __len__(self):
        return self.tokens.shape[0]


@dataclass(frozen=True)
class TrainSettings:
    steps: int = 1200
    batch: int = 16
    lr: float = 2e-3
    seed: int = 0
    log_every: int = 0


@dataclass
class TrainResult:
    arrays: dict[str, np.ndarray]
    loss_trace: list[float]

    @property
    def final_loss(self) -> float:
        return float(np.mean(self.loss_trace[-20:]))


def split_context_future(latents: list[LatentTrajectory]) -> tuple[LatentBatch, LatentBatch]:
    """Stack trajectories and split at the context/future boundary (frame 4/5)."""
    if not latents:
        raise ValueError("split_context_future: empty latent list")
    if any(not traj.normalized for traj in latents):
        raise ValueError("latents must be normalized before forecaster training")
    tokens = np.stack([traj.tokens for traj in latents]).astype(np.float32)
    return (
        LatentBatch(tokens=tokens[:, :CONTEXT_FRAMES], normalized=True),
        LatentBatch(tokens=tokens[:, CONTEXT_FRAMES:], normalized=True),
    )


def _check_batches(context: LatentBatch, future: LatentBatch, spec: DenoiserSpec):
    if not context.normalized or not future.normalized:
        raise ValueError("forecaster training requires normalized latents")
    if context.tokens.shape[1] != CONTEXT_FRAMES or future.tokens.shape[1] != spec.future_frames:
        raise ValueError(
            f"context/future must split at frame {CONTEXT_FRAMES}/{CONTEXT_FRAMES + 1}: "
            f"got {context.tokens.shape[1]} + {future.tokens.shape[1]} frames"
        )
    if len(context) != len(future):
        raise ValueError("context/future example counts differ")


def _run_training(objective, spec: DenoiserSpec, settings: TrainSettings, n_examples: int) -> TrainResult:
    params = nn.arrays_to_params(init_denoiser_arrays(spec), trainable=True)
    ordered = [params[k] for k in sorted(params)]
    opt = nk.OptimizerState(lr=settings.lr)
    rng = np.random.default_rng(np.random.SeedSequence([settings.seed, 71]))
    trace: list[float] = []
    for step in range(settings.steps):
        idx = rng.integers(n_examples, size=min(settings.batch, n_examples))
        loss = objective(params, idx, rng)
        value = loss.item()
        if not np.isfinite(value):
            raise FloatingPointError(f"forecaster training: non-finite loss at step {step}")
        trace.append(value)
        for p in ordered:
            p.zero_grad()
        loss.backward()
        nk.adam_step(opt, ordered)
        if settings.log_every and step % settings.log_every == 0:
            print(f"[forecaster] step {step} loss {value:.5f}")
    return TrainResult(arrays=nn.params_to_arrays(params), loss_trace=trace)


def train_diffusion(
    context: LatentBatch,
    future: LatentBatch,
    spec: DenoiserSpec,
    schedule: NoiseSchedule,
    settings: TrainSettings | None = None,
) -> TrainResult:
    """Minimize E||eps - eps_hat(x_s, s, context)||^2 per future dimension."""
    _check_batches(context, future, spec)
    schedule.check_terminal()
    if schedule.steps != spec.schedule_steps:
        raise ValueError("schedule step count differs from the denoiser spec")
    settings = settings or TrainSettings()
    ctx, fut = context.tokens, future.tokens

    def objective(params, idx, rng):
        x0 = fut[idx]
        eps = rng.standard_normal(x0.shape).astype(np.float32)
        steps = rng.integers(1, schedule.steps + 1, size=len(idx))
        noisy = np.stack([q_sample(x0[i], int(steps[i]), eps[i], schedule) for i in range(len(idx))])
        tokens = np.concatenate([ctx[idx], noisy], axis=1)
        pred = denoiser_forward(params, spec, nk.tensor(tokens), steps)
        return nk.square(pred - nk.tensor(eps)).mean()

    return _run_training(objective, spec, settings, len(context))


def train_regression(
    context: LatentBatch,
    future: LatentBatch,
    spec: DenoiserSpec,
    settings: TrainSettings | None = None,
) -> TrainResult:
    """Same architecture, constant timestep input, L2 to the true future."""
    _check_batches(context, future, spec)
    settings = settings or TrainSettings()
    ctx, fut = context.tokens, future.tokens

    def objective(params, idx, rng):
        x0 = fut[idx]
        tokens = np.concatenate([ctx[idx], np.zeros_like(x0)], axis=1)
        pred = denoiser_forward(params, spec, nk.tensor(tokens), np.zeros(len(idx), dtype=np.int64))
        return nk.square(pred - nk.tensor(x0)).mean()

    return _run_training(objective, spec, settings, len(context))
