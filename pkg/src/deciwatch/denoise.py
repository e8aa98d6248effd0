"""DenoiseNet: transformer encoder that refines noisy visible poses.

    features = Encoder(noisy @ W_DE + E_pos)
    clean    = features @ W_DD
"""

from __future__ import annotations

import numpy as np

from . import nn
from . import tensor as tn
from .config import ModelConfig
from .errors import DimensionError


def init_denoise_params(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    KD, C, V = cfg.pose_width, cfg.channels, cfg.visible_count
    p = {}
    p["denoise.W_DE"] = nn.xavier(rng, KD, C)
    if cfg.pos_embedding == "learned":
        table = rng.normal(0.0, 0.02, (V, C))
        p["denoise.E_pos"] = np.zeros_like(table) if cfg.init == "identity" else table
    for i in range(cfg.blocks):
        pre = f"denoise.blocks.{i}"
        nn.init_norm(p, f"{pre}.ln1", cfg)
        nn.init_attention(p, f"{pre}.attn", cfg, rng)
        nn.init_norm(p, f"{pre}.ln2", cfg)
        nn.init_ffn(p, f"{pre}.ffn", cfg, rng)
    if cfg.init == "identity":
        # W_DE @ W_DD = I whenever C >= K*D
        p["denoise.W_DD"] = np.linalg.pinv(p["denoise.W_DE"])
    else:
        p["denoise.W_DD"] = nn.xavier(rng, C, KD)
    return p


def positional_table(params, prefix: str, length: int, cfg: ModelConfig):
    key = f"{prefix}.E_pos"
    if cfg.pos_embedding == "learned":
        table = params[key]
        if table.shape[0] != length:
            raise DimensionError(
                f"{key} has {table.shape[0]} rows but the input has {length} frames")
        return table
    return tn.Tensor(nn.sinusoidal_table(length, cfg.channels))


def denoise_forward(noisy, params, cfg: ModelConfig, rng=None):
    """Map ``(..., Q+1, K*D)`` noisy visible poses to ``(clean, features)``.

    ``features`` is the encoder output (``(..., Q+1, C)``) that RecoverNet
    attends to.
    """
    noisy = tn.as_tensor(noisy)
    if noisy.shape[-1] != cfg.pose_width:
        raise DimensionError(
            f"pose width {noisy.shape[-1]} does not match K*D={cfg.pose_width}")
    x = noisy @ params["denoise.W_DE"]
    x = x + positional_table(params, "denoise", noisy.shape[-2], cfg)
    for i in range(cfg.blocks):
        x = nn.encoder_block(x, params, f"denoise.blocks.{i}", cfg, rng)
    return x @ params["denoise.W_DD"], x


def denoise_param_count(cfg: ModelConfig) -> int:
    KD, C, F, V = cfg.pose_width, cfg.channels, cfg.ffn_width, cfg.visible_count
    per_block = 4 * C * C + 4 * C + 2 * C * F + F + C + 4 * C
    pos = V * C if cfg.pos_embedding == "learned" else 0
    return 2 * KD * C + pos + cfg.blocks * per_block


def denoise_flops(cfg: ModelConfig, visible_count: int | None = None) -> int:
    """Multiply-accumulates for one window: both projections, and per block
    attention (Q/K/V/out, scores, weighted sum), feed-forward and two layer
    norms (one MAC per normalised element)."""
    V = cfg.visible_count if visible_count is None else visible_count
    KD, C, F = cfg.pose_width, cfg.channels, cfg.ffn_width
    per_block = nn.attention_macs(V, V, C) + nn.ffn_macs(V, C, F) + 2 * V * C
    return 2 * V * KD * C + cfg.blocks * per_block
