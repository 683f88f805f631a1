"""Adaptive-moment (Adam) parameter updates with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor

__all__ = ["OptimizerState", "adam_step"]


@dataclass
class OptimizerState:
    """Per-parameter first/second moment accumulators plus hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def ensure(self, params: list[Tensor]):
        if not self.m:
            self.m = [np.zeros_like(p.data) for p in params]
            self.v = [np.zeros_like(p.data) for p in params]
        for mom, p in zip(self.m, params):
            if mom.shape != p.shape:
                raise ValueError(f"optimizer state shape {mom.shape} does not match parameter {p.shape}")


def adam_step(state: OptimizerState, params: list[Tensor], grads: list[np.ndarray] | None = None) -> list[Tensor]:
    """One bias-corrected Adam update, in place on the parameter tensors.

    grads defaults to each parameter's accumulated .grad. Non-finite
    gradients raise (training divergence signal).
    """
    state.ensure(params)
    if grads is None:
        grads = [p.grad for p in params]
    if len(grads) != len(params):
        raise ValueError("adam_step: grads/params length mismatch")
    for i, g in enumerate(grads):
        if g is None:
            grads[i] = np.zeros_like(params[i].data)
        elif not np.all(np.isfinite(g)):
            raise FloatingPointError(f"adam_step: non-finite gradient for parameter {i}")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        mhat = m / bc1
        vhat = v / bc2
        p.data -= (state.lr * mhat / (np.sqrt(vhat) + state.eps)).astype(p.data.dtype)
    return params
