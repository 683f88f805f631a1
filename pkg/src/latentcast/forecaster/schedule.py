"""DDPM noise schedule and the closed-form forward (noising) process.

Betas follow the standard 1000-step linear schedule rescaled to S steps:
beta_s linear from 1e-4*(1000/S) to 0.02*(1000/S). Steps are 1-indexed
(s = 1..S); alpha_bar is strictly decreasing with alpha_bar_S < 0.01.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["NoiseSchedule", "q_sample"]


@dataclass(frozen=True)
class NoiseSchedule:
    steps: int = 200
    betas: np.ndarray = field(default=None)
    alphas: np.ndarray = field(default=None)
    alpha_bar: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("NoiseSchedule: need at least 2 steps")
        scale = 1000.0 / self.steps
        betas = np.linspace(1e-4 * scale, 0.02 * scale, self.steps, dtype=np.float64)
        if betas.min() <= 0.0 or betas.max() >= 1.0:
            raise ValueError("NoiseSchedule: betas must lie in (0, 1)")
        alphas = 1.0 - betas
        alpha_bar = np.cumprod(alphas)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bar", alpha_bar)

    def check_terminal(self):
        if not np.all(np.diff(self.alpha_bar) < 0):
            raise ValueError("NoiseSchedule: alpha_bar must be strictly decreasing")
        if self.alpha_bar[-1] >= 0.01:
            raise ValueError(f"NoiseSchedule: terminal alpha_bar {self.alpha_bar[-1]:.4f} >= 0.01")
        return self

    def abar(self, s: int) -> float:
        """Cumulative signal fraction at 1-indexed step s."""
        if not 1 <= s <= self.steps:
            raise ValueError(f"NoiseSchedule: step {s} outside 1..{self.steps}")
        return float(self.alpha_bar[s - 1])

    def abar_prev(self, s: int) -> float:
        if not 1 <= s <= self.steps:
            raise ValueError(f"NoiseSchedule: step {s} outside 1..{self.steps}")
        return float(self.alpha_bar[s - 2]) if s > 1 else 1.0

    def posterior_sigma(self, s: int) -> float:
        """Ancestral sampler noise scale at step s (zero at s = 1)."""
        ab, ab_prev = self.abar(s), self.abar_prev(s)
        beta = float(self.betas[s - 1])
        var = (1.0 - ab_prev) / (1.0 - ab) * beta
        return float(np.sqrt(max(var, 0.0)))


def q_sample(x0: np.ndarray, s: int, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """Closed-form forward marginal x_s = sqrt(abar_s) x0 + sqrt(1-abar_s) eps."""
    x0 = np.asarray(x0)
    eps = np.asarray(eps)
    if x0.shape != eps.shape:
        raise ValueError(f"q_sample: x0 {x0.shape} and eps {eps.shape} must match")
    ab = schedule.abar(s)
    return (np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps).astype(x0.dtype)
