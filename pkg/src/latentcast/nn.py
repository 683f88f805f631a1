"""Shared model plumbing: parameter stores, transformer blocks, embeddings.

Models are functional: parameters live in a flat dict[str, Tensor] keyed by
dotted names, and forward functions take (params, inputs). That keeps
checkpointing trivial (one LTEN file per named tensor) and makes the frozen
contract auditable.
"""

from __future__ import annotations

import numpy as np

from . import numkit as nk
from .numkit import Tensor

__all__ = [
    "Params",
    "init_linear",
    "init_layer_norm",
    "init_block",
    "linear",
    "layer_norm_layer",
    "multihead_attention",
    "cross_attention_block",
    "transformer_block",
    "sinusoidal_embedding",
    "params_to_arrays",
    "arrays_to_params",
    "count_parameters",
]

Params = dict[str, Tensor]


def init_linear(params: Params, name: str, rng: np.random.Generator, fan_in: int, fan_out: int, bias: bool = True, zero: bool = False):
    if zero:
        w = np.zeros((fan_in, fan_out), dtype=np.float32)
    else:
        w = (rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)).astype(np.float32)
    params[f"{name}.w"] = nk.param(w)
    if bias:
        params[f"{name}.b"] = nk.param(np.zeros(fan_out, dtype=np.float32))


def linear(params: Params, name: str, x: Tensor) -> Tensor:
    out = x @ params[f"{name}.w"]
    b = params.get(f"{name}.b")
    return out + b if b is not None else out


def init_layer_norm(params: Params, name: str, dim: int):
    params[f"{name}.g"] = nk.param(np.ones(dim, dtype=np.float32))
    params[f"{name}.o"] = nk.param(np.zeros(dim, dtype=np.float32))


def layer_norm_layer(params: Params, name: str, x: Tensor) -> Tensor:
    return nk.layer_norm(x, params[f"{name}.g"], params[f"{name}.o"])


def _split_heads(x: Tensor, heads: int) -> Tensor:
    b, n, d = x.shape
    return x.reshape(b, n, heads, d // heads).transpose((0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    b, h, n, dh = x.shape
    return x.transpose((0, 2, 1, 3)).reshape(b, n, h * dh)


def multihead_attention(params: Params, name: str, q_in: Tensor, kv_in: Tensor, heads: int) -> Tensor:
    """Attention from q_in [B, Nq, D] over kv_in [B, Nk, D]."""
    q = linear(params, f"{name}.q", q_in)
    k = linear(params, f"{name}.k", kv_in)
    v = linear(params, f"{name}.v", kv_in)
    if heads > 1:
        out = nk.attention(_split_heads(q, heads), _split_heads(k, heads), _split_heads(v, heads))
        out = _merge_heads(out)
    else:
        out = nk.attention(q, k, v)
    return linear(params, f"{name}.out", out)


def init_attention(params: Params, name: str, rng: np.random.Generator, dim: int):
    # no key bias: softmax is invariant to a constant shift across keys,
    # which would leave a parameter with an exactly-zero gradient
    for part in ("q", "k", "v", "out"):
        init_linear(params, f"{name}.{part}", rng, dim, dim, bias=part != "k")


def init_block(params: Params, name: str, rng: np.random.Generator, dim: int, mlp_ratio: int = 2):
    """Pre-LN transformer block parameters (self- or cross-attention)."""
    init_layer_norm(params, f"{name}.ln1", dim)
    init_attention(params, f"{name}.attn", rng, dim)
    init_layer_norm(params, f"{name}.ln2", dim)
    init_linear(params, f"{name}.mlp_in", rng, dim, dim * mlp_ratio)
    init_linear(params, f"{name}.mlp_out", rng, dim * mlp_ratio, dim)


def transformer_block(params: Params, name: str, x: Tensor, heads: int) -> Tensor:
    h = layer_norm_layer(params, f"{name}.ln1", x)
    x = x + multihead_attention(params, f"{name}.attn", h, h, heads)
    h = layer_norm_layer(params, f"{name}.ln2", x)
    h = linear(params, f"{name}.mlp_out", nk.gelu(linear(params, f"{name}.mlp_in", h)))
    return x + h


def cross_attention_block(params: Params, name: str, queries: Tensor, memory: Tensor, heads: int) -> Tensor:
    h = layer_norm_layer(params, f"{name}.ln1", queries)
    queries = queries + multihead_attention(params, f"{name}.attn", h, memory, heads)
    h = layer_norm_layer(params, f"{name}.ln2", queries)
    h = linear(params, f"{name}.mlp_out", nk.gelu(linear(params, f"{name}.mlp_in", h)))
    return queries + h


def sinusoidal_embedding(positions: np.ndarray, dim: int, max_period: float = 10_000.0) -> np.ndarray:
    """Fixed sin/cos embedding table for integer or float positions."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-np.log(max_period) * np.arange(half) / max(half - 1, 1))
    angles = positions[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    if emb.shape[1] < dim:
        emb = np.concatenate([emb, np.zeros((emb.shape[0], dim - emb.shape[1]))], axis=1)
    return emb.astype(np.float32)


def params_to_arrays(params: Params) -> dict[str, np.ndarray]:
    return {name: t.data.astype(np.float32, copy=True) for name, t in params.items()}


def arrays_to_params(arrays: dict[str, np.ndarray], trainable: bool = False) -> Params:
    return {name: (nk.param(a.copy()) if trainable else nk.tensor(a.copy())) for name, a in arrays.items()}


def count_parameters(params: Params) -> int:
    return sum(t.size for t in params.values())
