"""Transformer building blocks on top of :mod:`deciwatch.tensor`.

Parameters live in a flat mapping from dotted names to 2D arrays (biases and
layer-norm vectors are ``1 x n``), which is also how checkpoints store them.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as tn
from .config import ModelConfig


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, (fan_in, fan_out))


def sinusoidal_table(length: int, width: int) -> np.ndarray:
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(width, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * (i // 2)) / width)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def init_attention(params: dict, prefix: str, cfg: ModelConfig, rng) -> None:
    C = cfg.channels
    for name in ("q", "k", "v"):
        params[f"{prefix}.W{name}"] = xavier(rng, C, C)
        params[f"{prefix}.b{name}"] = np.zeros((1, C))
    params[f"{prefix}.Wo"] = np.zeros((C, C)) if cfg.init == "identity" else xavier(rng, C, C)
    params[f"{prefix}.bo"] = np.zeros((1, C))


def init_ffn(params: dict, prefix: str, cfg: ModelConfig, rng) -> None:
    C, F = cfg.channels, cfg.ffn_width
    params[f"{prefix}.W1"] = xavier(rng, C, F)
    params[f"{prefix}.b1"] = np.zeros((1, F))
    params[f"{prefix}.W2"] = np.zeros((F, C)) if cfg.init == "identity" else xavier(rng, F, C)
    params[f"{prefix}.b2"] = np.zeros((1, C))


def init_norm(params: dict, prefix: str, cfg: ModelConfig) -> None:
    params[f"{prefix}.gain"] = np.ones((1, cfg.channels))
    params[f"{prefix}.bias"] = np.zeros((1, cfg.channels))


def norm(x, p, prefix, cfg):
    return tn.layer_norm(x, p[f"{prefix}.gain"], p[f"{prefix}.bias"], cfg.eps)


def _split_heads(x, heads):
    *lead, length, width = x.shape
    x = tn.reshape(x, (*lead, length, heads, width // heads))
    nd = len(x.shape)
    axes = list(range(nd - 3)) + [nd - 2, nd - 3, nd - 1]
    return tn.transpose(x, axes)


def _merge_heads(x):
    nd = len(x.shape)
    axes = list(range(nd - 3)) + [nd - 2, nd - 3, nd - 1]
    x = tn.transpose(x, axes)
    *lead, length, heads, dh = x.shape
    return tn.reshape(x, (*lead, length, heads * dh))


def attention(xq, xkv, p, prefix, cfg: ModelConfig, rng=None):
    """Multi-head scaled dot-product attention, queries from ``xq``, keys and
    values from ``xkv``. No masking."""
    q = _split_heads(xq @ p[f"{prefix}.Wq"] + p[f"{prefix}.bq"], cfg.heads)
    k = _split_heads(xkv @ p[f"{prefix}.Wk"] + p[f"{prefix}.bk"], cfg.heads)
    v = _split_heads(xkv @ p[f"{prefix}.Wv"] + p[f"{prefix}.bv"], cfg.heads)
    scores = tn.matmul(q, k.T) * (1.0 / math.sqrt(cfg.head_dim))
    weights = tn.dropout(tn.softmax_rows(scores), cfg.dropout, rng)
    out = _merge_heads(tn.matmul(weights, v))
    return out @ p[f"{prefix}.Wo"] + p[f"{prefix}.bo"]


def feed_forward(x, p, prefix, cfg: ModelConfig, rng=None):
    h = tn.relu(x @ p[f"{prefix}.W1"] + p[f"{prefix}.b1"])
    h = tn.dropout(h, cfg.dropout, rng)
    return h @ p[f"{prefix}.W2"] + p[f"{prefix}.b2"]


def _residual(x, branch, p, norm_prefix, cfg, rng):
    if cfg.norm_first:
        return x + tn.dropout(branch(norm(x, p, norm_prefix, cfg)), cfg.dropout, rng)
    return norm(x + tn.dropout(branch(x), cfg.dropout, rng), p, norm_prefix, cfg)


def encoder_block(x, p, prefix, cfg: ModelConfig, rng=None):
    x = _residual(x, lambda h: attention(h, h, p, f"{prefix}.attn", cfg, rng),
                  p, f"{prefix}.ln1", cfg, rng)
    return _residual(x, lambda h: feed_forward(h, p, f"{prefix}.ffn", cfg, rng),
                     p, f"{prefix}.ln2", cfg, rng)


def decoder_block(x, memory, p, prefix, cfg: ModelConfig, rng=None):
    x = _residual(x, lambda h: attention(h, h, p, f"{prefix}.self_attn", cfg, rng),
                  p, f"{prefix}.ln1", cfg, rng)
    x = _residual(x, lambda h: attention(h, memory, p, f"{prefix}.cross_attn", cfg, rng),
                  p, f"{prefix}.ln2", cfg, rng)
    return _residual(x, lambda h: feed_forward(h, p, f"{prefix}.ffn", cfg, rng),
                     p, f"{prefix}.ln3", cfg, rng)


def attention_macs(n_query: int, n_key: int, C: int) -> int:
    """Multiply-accumulates of one attention call: Q/K/V/output projections,
    scores and the weighted sum."""
    return 2 * n_query * C * C + 2 * n_key * C * C + 2 * n_query * n_key * C


def ffn_macs(rows: int, C: int, F: int) -> int:
    return 2 * rows * C * F
