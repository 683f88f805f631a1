"""Minimal dense-tensor reverse-mode autodiff core backed by numpy.

Tensors hold float32 (or float64) arrays. Every differentiable operation
records a TapeNode linking the result to its parents; backward() walks the
graph once in reverse topological order and accumulates gradients.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "TapeNode",
    "ShapeError",
    "tensor",
    "param",
    "no_grad",
    "grad_enabled",
    "add",
    "mul",
    "matmul",
    "softmax",
    "gelu",
    "sigmoid",
    "layer_norm",
    "attention",
    "mean_pool",
    "embedding",
    "concat",
    "huber",
    "bce_with_logits",
]

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class ShapeError(ValueError):
    """Raised when operand shapes do not conform for an op."""

    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {' vs '.join(map(str, self.shapes))}")


class TapeNode:
    """Graph record for one op: kind, parents, and a backward closure.

    The closure captures whatever forward values the op needs and returns one
    gradient array (or None) per parent.
    """

    __slots__ = ("op", "parents", "backward_fn")

    def __init__(self, op: str, parents: tuple["Tensor", ...], backward_fn: Callable):
        self.op = op
        self.parents = parents
        self.backward_fn = backward_fn


class Tensor:
    """A numpy array plus gradient accumulator and tape linkage."""

    __slots__ = ("data", "grad", "requires_grad", "node")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, (np.ndarray, np.generic)):
            arr = np.asarray(data)
            if arr.dtype not in (np.float32, np.float64):
                arr = arr.astype(np.float32)
        else:
            arr = np.asarray(data, dtype=np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.node: TapeNode | None = None

    # -- basic introspection ------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    # -- gradient flow ------------------------------------------------------
    def backward(self):
        """Accumulate gradients of this scalar into every reachable leaf.

        Visits each node exactly once in reverse topological order. Calling
        again after zeroing grads reproduces identical gradients.
        """
        if self.data.size != 1:
            raise ValueError(f"backward: loss must be scalar, got shape {self.data.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                topo.append(t)
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            if t.node is not None:
                for p in t.node.parents:
                    if id(p) not in seen and (p.requires_grad or p.node is not None):
                        stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for t in reversed(topo):
            if t.node is None or t.grad is None:
                continue
            grads = t.node.backward_fn(t.grad)
            for p, g in zip(t.node.parents, grads):
                if g is None or not (p.requires_grad or p.node is not None):
                    continue
                if p.grad is None:
                    p.grad = g if g.flags.owndata else g.copy()
                else:
                    p.grad = p.grad + g

    # -- operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __getitem__(self, idx):
        return index(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def swapaxes(self, a: int, b: int):
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return transpose(self, tuple(axes))

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)


def tensor(data, dtype=np.float32) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype))


def param(data, dtype=None) -> Tensor:
    """A leaf tensor that collects gradients."""
    arr = np.asarray(data)
    if dtype is not None:
        arr = arr.astype(dtype)
    elif arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float32)
    return Tensor(arr, requires_grad=True)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))


def _make(op: str, out: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    t = Tensor(out)
    if _GRAD_ENABLED and any(p.requires_grad or p.node is not None for p in parents):
        t.requires_grad = any(p.requires_grad for p in parents)
        t.node = TapeNode(op, parents, backward_fn)
    return t


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- elementwise ops ---------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError("add", a.shape, b.shape) from None

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make("add", out, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data - b.data
    except ValueError:
        raise ShapeError("sub", a.shape, b.shape) from None

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make("sub", out, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError("mul", a.shape, b.shape) from None

    def bwd(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make("mul", out, (a, b), bwd)


def div(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data / b.data
    except ValueError:
        raise ShapeError("div", a.shape, b.shape) from None

    def bwd(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return _make("div", out, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    return _make("neg", -a.data, (a,), lambda g: (-g,))


def square(a: Tensor) -> Tensor:
    return _make("square", a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _make("exp", out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return _make("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _make("sqrt", out, (a,), lambda g: (g / (2.0 * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-np.abs(a.data)))
    out = np.where(a.data >= 0, out, 1.0 - out)
    return _make("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _make("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


_INV_SQRT2 = 0.7071067811865476
_INV_SQRT2PI = 0.3989422804014327


def gelu(a: Tensor) -> Tensor:
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out = x * cdf

    def bwd(g):
        pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
        return (g * (cdf + x * pdf).astype(x.dtype),)

    return _make("gelu", out.astype(x.dtype), (a,), bwd)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0)
    return _make("relu", out, (a,), lambda g: (g * (a.data > 0),))


def softplus(a: Tensor) -> Tensor:
    # log(1 + e^x), stable for large |x|
    x = a.data
    out = np.logaddexp(0.0, x).astype(x.dtype)

    def bwd(g):
        s = 1.0 / (1.0 + np.exp(-np.abs(x)))
        s = np.where(x >= 0, s, 1.0 - s)
        return (g * s,)

    return _make("softplus", out, (a,), bwd)


# -- shape ops ----------------------------------------------------------------

def reshape(a: Tensor, shape: tuple) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, shape) from None
    return _make("reshape", out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes: tuple) -> Tensor:
    inv = tuple(np.argsort(axes))
    return _make("transpose", np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def index(a: Tensor, idx) -> Tensor:
    out = a.data[idx]

    def bwd(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make("index", out, (a,), bwd)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make("concat", out, tuple(parts), bwd)


# -- reductions ----------------------------------------------------------------

def reduce_sum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _make("sum", np.asarray(out, dtype=a.dtype), (a,), bwd)


def reduce_mean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = a.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        count = a.size
    elif isinstance(axis, tuple):
        count = int(np.prod([a.shape[ax] for ax in axis]))
    else:
        count = a.shape[axis]

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.shape).astype(a.dtype, copy=True),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / count, a.shape).astype(a.dtype, copy=True),)

    return _make("mean", np.asarray(out, dtype=a.dtype), (a,), bwd)


def mean_pool(a: Tensor, axis: int) -> Tensor:
    """Mean over one axis; the pooling primitive used by model heads."""
    return reduce_mean(a, axis=axis, keepdims=False)


# -- linear algebra ------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    if a.ndim > 2 and b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    out = a.data @ b.data

    def bwd(g):
        ga = g @ b.data.swapaxes(-1, -2)
        gb = a.data.swapaxes(-1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make("matmul", out, (a, b), bwd)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, numerically stable."""
    x = a.data
    m = x.max(axis=-1, keepdims=True)
    out = np.exp(x - m)
    out /= out.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = np.sum(g * out, axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _make("softmax", out, (a,), bwd)


def layer_norm(a: Tensor, gain: Tensor, offset: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to zero mean / unit variance, then affine."""
    if gain.shape != a.shape[-1:] or offset.shape != a.shape[-1:]:
        raise ShapeError("layer_norm", a.shape, gain.shape, offset.shape)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + offset.data
    d = x.shape[-1]

    def bwd(g):
        gx_hat = g * gain.data
        # d/dx of (x - mu) * inv with mu, var functions of x
        s1 = gx_hat.sum(axis=-1, keepdims=True)
        s2 = (gx_hat * xhat).sum(axis=-1, keepdims=True)
        ga = (gx_hat - s1 / d - xhat * s2 / d) * inv
        ggain = (g * xhat).reshape(-1, d).sum(axis=0)
        goff = g.reshape(-1, d).sum(axis=0)
        return ga.astype(x.dtype), ggain.astype(x.dtype), goff.astype(x.dtype)

    return _make("layer_norm", out.astype(x.dtype), (a, gain, offset), bwd)


def embedding(table: Tensor, indices: np.ndarray) -> Tensor:
    """Row lookup: indices of any shape gather rows from table [V, D]."""
    idx = np.asarray(indices)
    if idx.dtype.kind not in "iu":
        raise ShapeError("embedding", table.shape, idx.shape)
    out = table.data[idx]

    def bwd(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (full,)

    return _make("embedding", out, (table,), bwd)


def attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """Scaled dot-product attention over the last two axes.

    q: [..., Nq, d], k: [..., Nk, d], v: [..., Nk, dv] -> [..., Nq, dv].
    """
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise ShapeError("attention", q.shape, k.shape, v.shape)
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = matmul(mul(q, _as_tensor(np.float32(scale))), k.swapaxes(-1, -2))
    return matmul(softmax(scores), v)


# -- composite losses ----------------------------------------------------------

def _loss_weights(weight, shape, dtype):
    if weight is None:
        return None, float(int(np.prod(shape)) if shape else 1)
    w = np.asarray(weight, dtype=dtype)
    w = np.broadcast_to(w, shape)
    return w, max(float(w.sum()), 1e-8)


def huber(pred: Tensor, target: np.ndarray, delta: float, weight: np.ndarray | None = None) -> Tensor:
    """Weighted mean Huber loss; quadratic within delta, linear outside."""
    t = np.asarray(target, dtype=pred.dtype)
    if t.shape != pred.shape:
        raise ShapeError("huber", pred.shape, t.shape)
    d = pred.data - t
    absd = np.abs(d)
    quad = absd <= delta
    vals = np.where(quad, 0.5 * d * d, delta * (absd - 0.5 * delta))
    w, denom = _loss_weights(weight, pred.shape, pred.dtype)
    total = vals.sum() if w is None else (vals * w).sum()

    def bwd(g):
        gd = np.where(quad, d, delta * np.sign(d))
        if w is not None:
            gd = gd * w
        return ((g / denom) * gd,)

    return _make("huber", np.asarray(total / denom, dtype=pred.dtype), (pred,), bwd)


def bce_with_logits(logits: Tensor, targets: np.ndarray, weight: np.ndarray | None = None) -> Tensor:
    """Weighted mean binary cross-entropy on logits, stable form."""
    t = np.asarray(targets, dtype=logits.dtype)
    if t.shape != logits.shape:
        raise ShapeError("bce_with_logits", logits.shape, t.shape)
    x = logits.data
    # max(x,0) - x*t + log(1 + exp(-|x|))
    vals = np.maximum(x, 0) - x * t + np.log1p(np.exp(-np.abs(x)))
    w, denom = _loss_weights(weight, logits.shape, logits.dtype)
    total = vals.sum() if w is None else (vals * w).sum()

    def bwd(g):
        s = 1.0 / (1.0 + np.exp(-np.abs(x)))
        s = np.where(x >= 0, s, 1.0 - s)
        gd = s - t
        if w is not None:
            gd = gd * w
        return ((g / denom) * gd,)

    return _make("bce_with_logits", np.asarray(total / denom, dtype=logits.dtype), (logits,), bwd)
