"""Loss, optimiser, training loop, checkpoints and label mode."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import tensor as tn
from .config import ModelConfig
from .errors import (ConfigError, DimensionError, DivergenceError, ParseError,
                     SequenceTooShortError)
from .model import DeciWatch
from .posedata import PoseSequence, Window, slice_windows
from .recover import RecoveredWindow
from .sampling import make_plan

log = logging.getLogger(__name__)

CHECKPOINT_TAG = "DWCKPTv1"
LOG_COLUMNS = ("epoch", "step", "loss_total", "loss_recover", "loss_denoise")


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 5.0
    lr: float = 1e-3
    optimizer: str = "adam"
    epochs: int = 100
    batch: int = 0
    seed: int = 0
    N: int = 10
    Q: int = 10
    C: int = 64
    M: int = 5
    H: int = 4
    kernel_size: int = 5
    strategy: str = "uniform"
    dropout: float = 0.0
    label_mode: bool = False
    joints: int = 15
    dims: int = 2
    init: str = "identity"
    norm_first: bool = True
    pos_embedding: str = "learned"
    centering: str = "window"
    upsample_lr_scale: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f"lambda must be > 0, got {self.lam}")
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be > 0, got {self.lr}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not self.upsample_lr_scale > 0:
            raise ConfigError("upsample_lr_scale must be > 0")
        if self.epochs < 0 or self.batch < 0:
            raise ConfigError("epochs and batch must be >= 0")

    def model_config(self) -> ModelConfig:
        return ModelConfig(joints=self.joints, dims=self.dims, N=self.N, Q=self.Q,
                           channels=self.C, blocks=self.M, heads=self.H,
                           kernel_size=self.kernel_size, dropout=self.dropout,
                           pos_embedding=self.pos_embedding, norm_first=self.norm_first,
                           init=self.init, centering=self.centering)

    def to_lines(self) -> list[str]:
        return [f"{k}={_fmt_value(v)}" for k, v in asdict(self).items()]

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "TrainConfig":
        kwargs = {}
        for f in fields(cls):
            if f.name in values:
                kwargs[f.name] = _parse_value(values[f.name], type(getattr(cls(), f.name)))
        return cls(**kwargs)


def _fmt_value(v):
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def _parse_value(text: str, kind):
    if kind is bool:
        if text.lower() in ("1", "true", "yes"):
            return True
        if text.lower() in ("0", "false", "no"):
            return False
        raise ConfigError(f"not a boolean: {text!r}")
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as {kind.__name__}") from None


# ---------------------------------------------------------------------------
# data


@dataclass
class WindowBatch:
    """Training or evaluation windows stacked along the first axis."""

    noisy_sampled: np.ndarray  # (B, V, K*D)
    gt: np.ndarray  # (B, L, K*D)
    gt_sampled: np.ndarray  # (B, V, K*D)
    visible: np.ndarray  # (B, V) frame offsets inside the window
    windows: list[Window] = field(default_factory=list)

    def __len__(self):
        return self.noisy_sampled.shape[0]

    def subset(self, idx) -> "WindowBatch":
        return WindowBatch(self.noisy_sampled[idx], self.gt[idx], self.gt_sampled[idx],
                           self.visible[idx], [self.windows[i] for i in idx])

    @staticmethod
    def concat(batches) -> "WindowBatch":
        return WindowBatch(
            np.concatenate([b.noisy_sampled for b in batches]),
            np.concatenate([b.gt for b in batches]),
            np.concatenate([b.gt_sampled for b in batches]),
            np.concatenate([b.visible for b in batches]),
            [w for b in batches for w in b.windows])


def build_windows(noisy: PoseSequence, gt: PoseSequence, N: int, Q: int,
                  strategy: str = "uniform", seed: int = 0,
                  stride: int | None = None) -> WindowBatch:
    """Slice a (noisy, ground-truth) sequence pair into windows and sample
    the visible frames of each.

    By default the windows tile the sequence as in :func:`slice_windows`.
    A ``stride`` instead starts a window every ``stride`` frames; overlapping
    windows are only useful as extra training examples.
    """
    if noisy.coords.shape != gt.coords.shape:
        raise DimensionError(f"noisy {noisy.coords.shape} and ground truth "
                             f"{gt.coords.shape} shapes differ")
    if stride is None:
        windows = slice_windows(gt, N, Q)
    else:
        length = N * Q + 1
        if stride < 1:
            raise ConfigError(f"stride must be >= 1, got {stride}")
        if gt.T < length:
            raise SequenceTooShortError(gt.T, length)
        windows = [Window(s, length, N) for s in range(0, gt.T - length + 1, stride)]
    nflat, gflat = noisy.flat(), gt.flat()
    ns, gw, gs, vis = [], [], [], []
    for w in windows:
        plan = make_plan(strategy, w.length, N, seed=seed, window_start=w.start)
        idx = plan.array()
        if idx.size != Q + 1:
            raise ConfigError(
                f"strategy {strategy!r} gave {idx.size} visible frames, model needs {Q + 1}")
        ns.append(nflat[w.start + idx])
        gw.append(gflat[w.start:w.stop])
        gs.append(gflat[w.start + idx])
        vis.append(idx)
    return WindowBatch(np.stack(ns), np.stack(gw), np.stack(gs), np.stack(vis), windows)


# ---------------------------------------------------------------------------
# loss


def loss_terms(recovered, clean_sampled, gt_window, gt_sampled, lam: float):
    """Return ``(total, recover_term, denoise_term)`` graph nodes.

    Each term is the mean absolute error over frames, joints and coordinates
    (and windows); ``total = lam * recover_term + denoise_term``.
    """
    recovered, clean_sampled = tn.as_tensor(recovered), tn.as_tensor(clean_sampled)
    gt_window, gt_sampled = np.asarray(gt_window), np.asarray(gt_sampled)
    if recovered.shape != gt_window.shape or clean_sampled.shape != gt_sampled.shape:
        raise DimensionError(
            f"prediction shapes {recovered.shape}/{clean_sampled.shape} do not match "
            f"targets {gt_window.shape}/{gt_sampled.shape}")
    rec = tn.mean_all(tn.absolute(recovered - gt_window))
    den = tn.mean_all(tn.absolute(clean_sampled - gt_sampled))
    return rec * lam + den, rec, den


def loss(recovered, clean_sampled, gt_window, gt_sampled, lam: float = 5.0) -> float:
    return float(loss_terms(recovered, clean_sampled, gt_window, gt_sampled, lam)[0].value[0, 0])


# ---------------------------------------------------------------------------
# optimisers


class Adam:
    """Adam; ``lr_scale`` maps parameter names to learning-rate multipliers."""

    def __init__(self, params: dict, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8,
                 lr_scale: dict | None = None):
        self.params = params
        self.lr = lr
        self.lr_scale = lr_scale or {}
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.value) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.value) for k, p in params.items()}

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            m = self.m[k]
            v = self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            step = lr * self.lr_scale.get(k, 1.0)
            p.value = p.value - step * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, params: dict, lr: float = 1e-3, lr_scale: dict | None = None):
        self.params = params
        self.lr = lr
        self.lr_scale = lr_scale or {}

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        for k, p in self.params.items():
            p.value = p.value - lr * self.lr_scale.get(k, 1.0) * p.grad


def make_optimizer(name: str, params: dict, lr: float, lr_scale: dict | None = None):
    kind = Adam if name == "adam" else SGD
    return kind(params, lr, lr_scale=lr_scale)


def lr_at(cfg: TrainConfig, epoch: int) -> float:
    """Learning rate halved after each third of training."""
    third = max(1, math.ceil(cfg.epochs / 3))
    return cfg.lr * 0.5 ** (epoch // third)


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    config: TrainConfig
    params: dict[str, np.ndarray]
    norm_mean: np.ndarray
    norm_scale: float
    step: int = 0
    rng_state: dict | None = None
    version: str = CHECKPOINT_TAG

    def model(self) -> DeciWatch:
        return DeciWatch(self.config.model_config(), params=self.params,
                         norm_mean=self.norm_mean, norm_scale=self.norm_scale)


def save_checkpoint(ckpt: Checkpoint, path: str | os.PathLike) -> None:
    lines = [CHECKPOINT_TAG]
    lines += ckpt.config.to_lines()
    lines.append(f"step={ckpt.step}")
    lines.append(f"norm_scale={_fmt_value(ckpt.norm_scale)}")
    lines.append("rng_state=" + json.dumps(ckpt.rng_state, sort_keys=True))
    blocks = {"norm.mean": ckpt.norm_mean.reshape(1, -1), **ckpt.params}
    for name, arr in blocks.items():
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionError(f"parameter {name} is not 2D: {arr.shape}")
        lines.append(f"PARAM {name} {arr.shape[0]} {arr.shape[1]}")
        for row in arr:
            lines.append(" ".join("%.17g" % v for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_TAG:
        raise ParseError(f"not a {CHECKPOINT_TAG} checkpoint", 1)
    i = 1
    values = {}
    while i < len(lines) and not lines[i].startswith("PARAM "):
        key, sep, val = lines[i].partition("=")
        if not sep:
            raise ParseError(f"expected key=value, got {lines[i]!r}", i + 1)
        values[key.strip()] = val.strip()
        i += 1
    try:
        config = TrainConfig.from_mapping(values)
        step = int(values.get("step", "0"))
        norm_scale = float(values.get("norm_scale", "1"))
        rng_state = json.loads(values.get("rng_state", "null"))
    except (ConfigError, ValueError) as exc:
        raise ParseError(f"bad checkpoint header: {exc}") from None
    arrays = {}
    while i < len(lines):
        parts = lines[i].split()
        if len(parts) != 4 or parts[0] != "PARAM":
            raise ParseError(f"expected PARAM header, got {lines[i][:60]!r}", i + 1)
        name, rows, cols = parts[1], int(parts[2]), int(parts[3])
        if i + rows >= len(lines):
            raise ParseError(f"parameter {name} truncated", len(lines))
        data = np.empty((rows, cols))
        for r in range(rows):
            try:
                row = [float(tok) for tok in lines[i + 1 + r].split()]
            except ValueError:
                raise ParseError(f"bad number in parameter {name}", i + 2 + r) from None
            if len(row) != cols:
                raise ParseError(f"parameter {name} row has {len(row)} values, expected {cols}",
                                 i + 2 + r)
            data[r] = row
        arrays[name] = data
        i += 1 + rows
    norm_mean = arrays.pop("norm.mean", None)
    if norm_mean is None:
        raise ParseError("checkpoint has no norm.mean block")
    return Checkpoint(config, arrays, norm_mean.reshape(-1), norm_scale, step, rng_state)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: list[tuple]


def normalisation_stats(gt: np.ndarray, gt_sampled: np.ndarray | None = None,
                        centering: str = "global") -> tuple[np.ndarray, float]:
    """``(mean, scale)`` of ground-truth windows ``(B, L, K*D)``.

    Under window centering the spread is measured around each window's mean
    visible pose and the returned mean is zero.
    """
    if centering == "window":
        if gt_sampled is None:
            raise ConfigError("window centering needs the sampled ground truth")
        centred = gt - gt_sampled.mean(axis=-2, keepdims=True)
        mean = np.zeros(gt.shape[-1])
    else:
        flat = gt.reshape(-1, gt.shape[-1])
        mean = flat.mean(axis=0)
        centred = flat - mean
    scale = float(np.sqrt((centred ** 2).mean()))
    return mean, (scale if scale > 0 else 1.0)


def train(data: WindowBatch, cfg: TrainConfig, model: DeciWatch | None = None,
          callback=None) -> TrainResult:
    """Fit DenoiseNet and RecoverNet jointly on ``data``.

    One optimiser step per mini-batch of ``cfg.batch`` windows (0 means all
    windows in one step). Deterministic given ``cfg.seed``. Raises
    :class:`DivergenceError` carrying the last finite checkpoint when the loss
    stops being finite.
    """
    if len(data) < 1:
        raise ConfigError("training needs at least one window")
    mcfg = cfg.model_config()
    if data.gt.shape[1] != mcfg.window_length or data.gt.shape[2] != mcfg.pose_width:
        raise ConfigError(
            f"data windows {data.gt.shape[1:]} do not match N*Q+1={mcfg.window_length}, "
            f"K*D={mcfg.pose_width}")
    if data.noisy_sampled.shape[1] != mcfg.visible_count:
        raise ConfigError(f"data windows have {data.noisy_sampled.shape[1]} visible frames, "
                          f"Q+1={mcfg.visible_count} expected")
    rng = np.random.default_rng(cfg.seed)
    if model is None:
        mean, scale = normalisation_stats(data.gt, data.gt_sampled, cfg.centering)
        model = DeciWatch(mcfg, seed=int(rng.integers(2**31)), norm_mean=mean,
                          norm_scale=scale, visible_positions=data.visible[0])
    opt = make_optimizer(cfg.optimizer, model.params, cfg.lr,
                         {"recover.W_PR": cfg.upsample_lr_scale})
    noisy = data.gt_sampled if cfg.label_mode else data.noisy_sampled
    batch = len(data) if cfg.batch == 0 else min(cfg.batch, len(data))

    def snapshot(step):
        return Checkpoint(cfg, {k: v.copy() for k, v in model.arrays().items()},
                          model.norm_mean.copy(), model.norm_scale, step,
                          rng.bit_generator.state)

    history = []
    step = 0
    last_good = snapshot(0)
    for epoch in range(cfg.epochs):
        lr = lr_at(cfg, epoch)
        order = rng.permutation(len(data)) if batch < len(data) else np.arange(len(data))
        for start in range(0, len(data), batch):
            idx = order[start:start + batch]
            model.zero_grad()
            clean, rec = model.forward(noisy[idx], rng=rng, label_mode=cfg.label_mode)
            total, lr_term, ld_term = loss_terms(rec, clean, data.gt[idx],
                                                 data.gt_sampled[idx], cfg.lam)
            value = float(total.value[0, 0])
            if not math.isfinite(value):
                raise DivergenceError(f"loss became {value} at epoch {epoch}, step {step}",
                                      last_good)
            last_good = snapshot(step)
            tn.backward(total)
            opt.step(lr)
            step += 1
            row = (epoch, step, value, float(lr_term.value[0, 0]), float(ld_term.value[0, 0]))
            history.append(row)
            if callback is not None:
                callback(row)
        if epoch % 50 == 0 or epoch == cfg.epochs - 1:
            log.info("epoch %d loss %.6g", epoch, history[-1][2])
    return TrainResult(snapshot(step), history)


def write_loss_log(rows, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(LOG_COLUMNS) + "\n")
        for epoch, step, total, rec, den in rows:
            fh.write(f"{epoch},{step},{total:.17g},{rec:.17g},{den:.17g}\n")


# ---------------------------------------------------------------------------


def label_mode(gt_sampled, ckpt: Checkpoint, N: int | None = None, Q: int | None = None,
               visible=None) -> RecoveredWindow | list[RecoveredWindow]:
    """Densify ground-truth visible poses ``(Q+1, K*D)`` (or a stack of them)
    with a trained model, skipping the denoising target."""
    cfg = ckpt.config
    if (N is not None and N != cfg.N) or (Q is not None and Q != cfg.Q):
        raise ConfigError(f"checkpoint was trained with N={cfg.N}, Q={cfg.Q}; "
                          f"got N={N}, Q={Q}")
    model = ckpt.model()
    gt_sampled = np.asarray(gt_sampled, dtype=np.float64)
    _, rec = model.predict(gt_sampled, label_mode=True)
    L = model.cfg.window_length
    if visible is None:
        visible = np.arange(0, L, cfg.N)
    flags = np.zeros(L, dtype=bool)
    flags[np.asarray(visible)] = True
    if rec.ndim == 2:
        return RecoveredWindow(rec, flags)
    return [RecoveredWindow(r, flags.copy()) for r in rec]


def with_overrides(cfg: TrainConfig, **kwargs) -> TrainConfig:
    return replace(cfg, **{k: v for k, v in kwargs.items() if v is not None})
