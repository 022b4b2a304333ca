"""Transformer building blocks over a ParameterStore.

Blocks are pre-norm: ``x + Attn(LN(x))`` then ``x + FFN(LN(x))``, with an
optional cross-attention sublayer in decoders. A final LayerNorm is
applied only when at least one layer is present, so zero layers is the
identity.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .params import ParameterStore
from .tensor import Tensor

NEG_INF = -1e30


@dataclass(frozen=True)
class TransformerConfig:
    n_layers: int = 2
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128

    def __post_init__(self):
        if self.n_heads < 1 or self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")


def embed(ids: Sequence[int], table: Tensor, factor: Tensor | None = None) -> Tensor:
    """Row lookup, optionally projected through a [d_e x d] factor."""
    rows = T.take_rows(table, ids)
    return rows if factor is None else rows @ factor


def causal_mask(n: int) -> np.ndarray:
    return np.triu(np.full((n, n), NEG_INF), k=1)


def scaled_dot_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    mask: np.ndarray | None = None,
    scale_divisor: float | None = None,
) -> tuple[Tensor, Tensor]:
    """softmax(q k^T / scale_divisor + mask) v; returns (output, weights)."""
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"query width {q.shape[-1]} != key width {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ValueError("keys and values differ in length")
    if scale_divisor is None:
        scale_divisor = float(np.sqrt(q.shape[-1]))
    scores = (q @ T.swap_last(k)) * (1.0 / scale_divisor)
    if mask is not None:
        scores = scores + mask
    weights = T.softmax(scores, axis=-1)
    return weights @ v, weights


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    n, d = x.shape
    return T.transpose(T.reshape(x, (n, n_heads, d // n_heads)), (1, 0, 2))


def _merge_heads(x: Tensor) -> Tensor:
    h, n, dh = x.shape
    return T.reshape(T.transpose(x, (1, 0, 2)), (n, h * dh))


def multi_head_attention(
    params: ParameterStore,
    prefix: str,
    x: Tensor,
    memory: Tensor,
    n_heads: int,
    mask: np.ndarray | None = None,
) -> Tensor:
    q = x @ params[f"{prefix}.wq"] + params[f"{prefix}.bq"]
    k = memory @ params[f"{prefix}.wk"]
    v = memory @ params[f"{prefix}.wv"] + params[f"{prefix}.bv"]
    dh = q.shape[-1] // n_heads
    out, _ = scaled_dot_attention(
        _split_heads(q, n_heads), _split_heads(k, n_heads), _split_heads(v, n_heads), mask, np.sqrt(dh)
    )
    return _merge_heads(out) @ params[f"{prefix}.wo"] + params[f"{prefix}.bo"]


def _ln(params: ParameterStore, prefix: str, x: Tensor) -> Tensor:
    return T.layer_norm(x, params[f"{prefix}.g"], params[f"{prefix}.b"])


def _ffn(params: ParameterStore, prefix: str, x: Tensor) -> Tensor:
    h = T.gelu(x @ params[f"{prefix}.w1"] + params[f"{prefix}.b1"])
    return h @ params[f"{prefix}.w2"] + params[f"{prefix}.b2"]


def transformer_encoder(x: Tensor, params: ParameterStore, prefix: str, cfg: TransformerConfig) -> Tensor:
    for i in range(cfg.n_layers):
        p = f"{prefix}.{i}"
        h = _ln(params, f"{p}.ln1", x)
        x = x + multi_head_attention(params, f"{p}.self", h, h, cfg.n_heads)
        x = x + _ffn(params, f"{p}.ffn", _ln(params, f"{p}.ln2", x))
    if cfg.n_layers:
        x = _ln(params, f"{prefix}.ln_f", x)
    return x


def transformer_decoder(
    x: Tensor,
    memory: Tensor,
    params: ParameterStore,
    prefix: str,
    cfg: TransformerConfig,
    causal: bool = True,
) -> Tensor:
    mask = causal_mask(x.shape[0]) if causal else None
    for i in range(cfg.n_layers):
        p = f"{prefix}.{i}"
        h = _ln(params, f"{p}.ln1", x)
        x = x + multi_head_attention(params, f"{p}.self", h, h, cfg.n_heads, mask)
        h = _ln(params, f"{p}.ln2", x)
        x = x + multi_head_attention(params, f"{p}.cross", h, memory, cfg.n_heads)
        x = x + _ffn(params, f"{p}.ffn", _ln(params, f"{p}.ln3", x))
    if cfg.n_layers:
        x = _ln(params, f"{prefix}.ln_f", x)
    return x


# initialisation


def init_linear(store: ParameterStore, name: str, d_in: int, d_out: int, rng: np.random.Generator) -> None:
    store.add(name, rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(d_in, d_out)))


def _init_attn(store, prefix, d, rng):
    # no key bias: it shifts every score in a row equally, so softmax ignores it
    for w in ("q", "k", "v", "o"):
        init_linear(store, f"{prefix}.w{w}", d, d, rng)
        if w != "k":
            store.add(f"{prefix}.b{w}", np.zeros(d))


def _init_ln(store, prefix, d):
    store.add(f"{prefix}.g", np.ones(d))
    store.add(f"{prefix}.b", np.zeros(d))


def _init_ffn(store, prefix, d, d_ff, rng):
    init_linear(store, f"{prefix}.w1", d, d_ff, rng)
    store.add(f"{prefix}.b1", np.zeros(d_ff))
    init_linear(store, f"{prefix}.w2", d_ff, d, rng)
    store.add(f"{prefix}.b2", np.zeros(d))


def init_encoder(store: ParameterStore, prefix: str, cfg: TransformerConfig, rng: np.random.Generator) -> None:
    d = cfg.d_model
    for i in range(cfg.n_layers):
        p = f"{prefix}.{i}"
        _init_ln(store, f"{p}.ln1", d)
        _init_attn(store, f"{p}.self", d, rng)
        _init_ln(store, f"{p}.ln2", d)
        _init_ffn(store, f"{p}.ffn", d, cfg.d_ff, rng)
    if cfg.n_layers:
        _init_ln(store, f"{prefix}.ln_f", d)


def init_decoder(store: ParameterStore, prefix: str, cfg: TransformerConfig, rng: np.random.Generator) -> None:
    d = cfg.d_model
    for i in range(cfg.n_layers):
        p = f"{prefix}.{i}"
        _init_ln(store, f"{p}.ln1", d)
        _init_attn(store, f"{p}.self", d, rng)
        _init_ln(store, f"{p}.ln2", d)
        _init_attn(store, f"{p}.cross", d, rng)
        _init_ln(store, f"{p}.ln3", d)
        _init_ffn(store, f"{p}.ffn", d, cfg.d_ff, rng)
    if cfg.n_layers:
        _init_ln(store, f"{prefix}.ln_f", d)
