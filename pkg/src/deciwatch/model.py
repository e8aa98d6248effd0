"""The full sample-denoise-recover model."""

from __future__ import annotations

import numpy as np

from . import tensor as tn
from .config import ModelConfig
from .denoise import denoise_flops, denoise_forward, init_denoise_params
from .errors import DimensionError
from .recover import init_recover_params, preliminary_recover, recover_flops, recover_forward


class DeciWatch:
    """DenoiseNet + RecoverNet with an input normalisation.

    Inputs in data units are mapped to ``(x - offset) / norm_scale`` before
    the networks and mapped back afterwards. The offset is the mean of the
    window's visible inputs under ``centering="window"`` and the stored
    ``norm_mean`` under ``"global"``; ``norm_scale`` comes from the training
    data and is stored with the parameters.
    """

    def __init__(self, cfg: ModelConfig, params: dict | None = None, seed: int = 0,
                 norm_mean=None, norm_scale: float = 1.0, visible_positions=None):
        self.cfg = cfg
        if params is None:
            rng = np.random.default_rng(seed)
            params = init_denoise_params(cfg, rng)
            params.update(init_recover_params(cfg, rng, visible_positions))
        self.params = {k: tn.Tensor(np.array(v, dtype=np.float64), requires_grad=True, name=k)
                       for k, v in params.items()}
        self.norm_mean = (np.zeros(cfg.pose_width) if norm_mean is None
                          else np.asarray(norm_mean, dtype=np.float64).reshape(-1))
        self.norm_scale = float(norm_scale)

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: t.value for k, t in self.params.items()}

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def _offset(self, x: np.ndarray) -> np.ndarray:
        if self.cfg.centering == "window":
            return x.mean(axis=-2, keepdims=True)
        return self.norm_mean

    def forward(self, noisy_sampled, rng=None, label_mode: bool = False):
        """Run both subnets on ``(..., Q+1, K*D)`` visible poses in data units.

        Returns ``(clean_sampled, recovered)`` graph nodes in data units. In
        label mode the inputs are taken as ground truth: they go straight into
        the upsampling while the encoder still supplies the features.
        """
        raw = np.asarray(noisy_sampled, dtype=np.float64)
        offset = self._offset(raw)
        x = (raw - offset) / self.norm_scale
        if x.shape[-2] != self.cfg.visible_count:
            raise DimensionError(
                f"model expects {self.cfg.visible_count} visible poses, got {x.shape[-2]}")
        clean, features = denoise_forward(x, self.params, self.cfg, rng)
        upsample_from = tn.Tensor(x) if label_mode else clean
        prelim = preliminary_recover(upsample_from, self.params["recover.W_PR"])
        recovered = recover_forward(prelim, features, self.params, self.cfg, rng)
        return (clean * self.norm_scale + offset,
                recovered * self.norm_scale + offset)

    def predict(self, noisy_sampled, label_mode: bool = False):
        """Forward pass without dropout; returns plain arrays."""
        clean, recovered = self.forward(noisy_sampled, rng=None, label_mode=label_mode)
        return clean.value, recovered.value

    def flops_per_frame(self) -> tuple[float, float]:
        """``(f_D, f_R)`` in giga-MACs per frame for this configuration."""
        L = self.cfg.window_length
        return denoise_flops(self.cfg) / L / 1e9, recover_flops(self.cfg) / L / 1e9
