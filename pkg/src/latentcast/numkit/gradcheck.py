"""Finite-difference gradient verification."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, no_grad

__all__ = ["grad_check"]


def grad_check(fn: Callable, point, step: float = 1e-3) -> float:
    """Max relative error between analytic and central-difference gradients.

    fn maps one tensor (or a sequence of tensors) to a scalar Tensor. The
    relative error per coordinate is |a - n| / (|a| + |n| + 1e-8); the max
    over all coordinates of all inputs is returned. Non-finite values
    propagate into the result so a failure is visible.
    """
    pts = list(point) if isinstance(point, (list, tuple)) else [point]
    leaves = [Tensor(p.data.copy() if isinstance(p, Tensor) else np.asarray(p), requires_grad=True) for p in pts]

    def call(ts: Sequence[Tensor]) -> Tensor:
        out = fn(ts) if len(leaves) > 1 or isinstance(point, (list, tuple)) else fn(ts[0])
        if out.size != 1:
            raise ValueError("grad_check: function must be scalar-valued")
        return out

    loss = call(leaves)
    loss.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in leaves]

    worst = 0.0
    with no_grad():
        for li, leaf in enumerate(leaves):
            flat = leaf.data.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                fp = call(leaves).item()
                flat[j] = orig - step
                fm = call(leaves).item()
                flat[j] = orig
                numeric = (fp - fm) / (2.0 * step)
                a = float(analytic[li].reshape(-1)[j])
                err = abs(a - numeric) / (abs(a) + abs(numeric) + 1e-8)
                if not np.isfinite(err):
                    return float(err)
                worst = max(worst, err)
    return worst
