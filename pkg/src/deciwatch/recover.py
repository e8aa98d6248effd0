"""RecoverNet: linear temporal upsampling followed by a transformer decoder.

    preliminary = W_PR @ clean
    poses       = Decoder(Conv1d(preliminary) + E_pos, features) @ W_RD

The decoder's queries are temporal-convolution pose tokens over the full
window; its cross-attention keys and values are DenoiseNet's features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from . import tensor as tn
from .config import ModelConfig
from .denoise import positional_table
from .errors import DimensionError
from .interpolation import linear_weights


@dataclass(frozen=True, eq=False)
class RecoveredWindow:
    """Full-window poses ``(window_length, K*D)`` with a per-frame flag that is
    True where the frame was visible to the estimator."""

    poses: np.ndarray
    visible: np.ndarray

    def __post_init__(self):
        if self.poses.shape[0] != self.visible.shape[0]:
            raise DimensionError("provenance flags do not match the window length")


def init_recover_params(cfg: ModelConfig, rng: np.random.Generator,
                        visible_positions=None) -> dict[str, np.ndarray]:
    """Fresh RecoverNet parameters.

    ``W_PR`` starts as the linear-interpolation matrix for
    ``visible_positions`` (uniform positions by default).
    """
    KD, C, L, ks = cfg.pose_width, cfg.channels, cfg.window_length, cfg.kernel_size
    if visible_positions is None:
        visible_positions = np.arange(0, L, cfg.N)
    p = {"recover.W_PR": linear_weights(visible_positions, L)}
    if cfg.init == "identity":
        centre = nn.xavier(rng, KD, C)
        conv = np.zeros((ks, KD, C))
        conv[ks // 2] = centre
        p["recover.conv.weight"] = conv.reshape(ks * KD, C)
    else:
        p["recover.conv.weight"] = nn.xavier(rng, ks * KD, C)
    p["recover.conv.bias"] = np.zeros((1, C))
    if cfg.pos_embedding == "learned":
        table = rng.normal(0.0, 0.02, (L, C))
        p["recover.E_pos"] = np.zeros_like(table) if cfg.init == "identity" else table
    for i in range(cfg.blocks):
        pre = f"recover.blocks.{i}"
        nn.init_norm(p, f"{pre}.ln1", cfg)
        nn.init_attention(p, f"{pre}.self_attn", cfg, rng)
        nn.init_norm(p, f"{pre}.ln2", cfg)
        nn.init_attention(p, f"{pre}.cross_attn", cfg, rng)
        nn.init_norm(p, f"{pre}.ln3", cfg)
        nn.init_ffn(p, f"{pre}.ffn", cfg, rng)
    if cfg.init == "identity":
        p["recover.W_RD"] = np.linalg.pinv(centre)
    else:
        p["recover.W_RD"] = nn.xavier(rng, C, KD)
    return p


def preliminary_recover(clean, W_PR):
    """Temporal upsampling ``W_PR @ clean``: ``(..., V, K*D) -> (..., L, K*D)``."""
    clean, W_PR = tn.as_tensor(clean), tn.as_tensor(W_PR)
    if W_PR.shape[-1] != clean.shape[-2]:
        raise DimensionError(
            f"W_PR has {W_PR.shape[-1]} columns but {clean.shape[-2]} visible poses were given")
    return tn.matmul(W_PR, clean)


def recover_forward(preliminary, features, params, cfg: ModelConfig, rng=None):
    """Decode full-window poses ``(..., L, K*D)`` from the preliminary sequence
    and the denoised features."""
    preliminary, features = tn.as_tensor(preliminary), tn.as_tensor(features)
    L = preliminary.shape[-2]
    if preliminary.shape[-1] != cfg.pose_width:
        raise DimensionError(
            f"pose width {preliminary.shape[-1]} does not match K*D={cfg.pose_width}")
    if features.shape[-1] != cfg.channels:
        raise DimensionError(
            f"feature width {features.shape[-1]} does not match C={cfg.channels}")
    x = tn.conv1d_temporal(preliminary, params["recover.conv.weight"], cfg.kernel_size)
    x = x + params["recover.conv.bias"]
    x = x + positional_table(params, "recover", L, cfg)
    for i in range(cfg.blocks):
        x = nn.decoder_block(x, features, params, f"recover.blocks.{i}", cfg, rng)
    return x @ params["recover.W_RD"]


def recover_param_count(cfg: ModelConfig) -> int:
    KD, C, F, L, V = (cfg.pose_width, cfg.channels, cfg.ffn_width,
                      cfg.window_length, cfg.visible_count)
    attn = 4 * C * C + 4 * C
    per_block = 2 * attn + 2 * C * F + F + C + 6 * C
    pos = L * C if cfg.pos_embedding == "learned" else 0
    return L * V + cfg.kernel_size * KD * C + C + pos + cfg.blocks * per_block + C * KD


def recover_flops(cfg: ModelConfig, window_length: int | None = None,
                  visible_count: int | None = None) -> int:
    """Multiply-accumulates for one window: the ``W_PR`` upsampling, the
    temporal convolution, the output projection and, per block, self- and
    cross-attention, feed-forward and three layer norms."""
    L = cfg.window_length if window_length is None else window_length
    V = cfg.visible_count if visible_count is None else visible_count
    KD, C, F, ks = cfg.pose_width, cfg.channels, cfg.ffn_width, cfg.kernel_size
    per_block = (nn.attention_macs(L, L, C) + nn.attention_macs(L, V, C)
                 + nn.ffn_macs(L, C, F) + 3 * L * C)
    return L * V * KD + L * ks * KD * C + L * C * KD + cfg.blocks * per_block
