"""Ancestral DDPM sampling and the single-shot regression forecast.

Sampling is deterministic given the seed, and each example draws from its
own seeded noise stream, so results do not depend on how examples are
batched. sample() never sees ground-truth futures: conditioning is the
context latents alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from .. import numkit as nk
from .denoiser import DenoiserSpec, denoiser_forward
from .schedule import NoiseSchedule
from .train import LatentBatch

__all__ = ["ForecastSampleSet", "sample", "regress"]


@dataclass
class ForecastSampleSet:
    """N sampled future latent trajectories for one example (normalized space)."""

    samples: np.ndarray  # [n, future_frames, N_tok, D]
    seed: int
    schedule_steps: int

    @property
    def n(self) -> int:
        return self.samples.shape[0]


def _example_rngs(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(np.random.SeedSequence([seed, i])) for i in range(count)]


def sample(
    context: LatentBatch,
    arrays: dict[str, np.ndarray],
    spec: DenoiserSpec,
    schedule: NoiseSchedule,
    n: int,
    seed: int,
) -> list[ForecastSampleSet]:
    """n ancestral-sampled futures per context example."""
    if n < 1:
        raise ValueError("sample: n must be >= 1")
    if not context.normalized:
        raise ValueError("sample: context latents must be normalized")
    if schedule.steps != spec.schedule_steps:
        raise ValueError("schedule step count differs from the denoiser spec")
    b = len(context)
    fut_shape = (spec.future_frames, spec.tokens_per_frame, spec.latent_dim)
    rngs = _example_rngs(seed, b)
    x = np.stack([rng.standard_normal((n, *fut_shape)).astype(np.float32) for rng in rngs])  # [B, n, ...]
    ctx = np.repeat(context.tokens[:, None], n, axis=1)  # [B, n, 4, N, D]
    params = nn.arrays_to_params(arrays)

    flat = lambda a: a.reshape(b * n, *a.shape[2:])
    with nk.no_grad():
        for s in range(schedule.steps, 0, -1):
            tokens = np.concatenate([flat(ctx), flat(x)], axis=1)
            step_index = np.full(b * n, s, dtype=np.int64)
            eps_hat = denoiser_forward(params, spec, nk.tensor(tokens), step_index).data
            eps_hat = eps_hat.reshape(b, n, *fut_shape)
            ab = schedule.abar(s)
            alpha = float(schedule.alphas[s - 1])
            beta = float(schedule.betas[s - 1])
            mean = (x - beta / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(alpha)
            sigma = schedule.posterior_sigma(s)
            if sigma > 0.0:
                noise = np.stack([rng.standard_normal((n, *fut_shape)).astype(np.float32) for rng in rngs])
                x = (mean + sigma * noise).astype(np.float32)
            else:
                x = mean.astype(np.float32)

    return [ForecastSampleSet(samples=x[i], seed=seed, schedule_steps=schedule.steps) for i in range(b)]


def regress(context: LatentBatch, arrays: dict[str, np.ndarray], spec: DenoiserSpec) -> np.ndarray:
    """Deterministic single future trajectory per example: [B, future, N, D]."""
    if not context.normalized:
        raise ValueError("regress: context latents must be normalized")
    b = len(context)
    zeros = np.zeros((b, spec.future_frames, spec.tokens_per_frame, spec.latent_dim), dtype=np.float32)
    tokens = np.concatenate([context.tokens, zeros], axis=1)
    params = nn.arrays_to_params(arrays)
    with nk.no_grad():
        pred = denoiser_forward(params, spec, nk.tensor(tokens), np.zeros(b, dtype=np.int64)).data
    return pred.astype(np.float32)
