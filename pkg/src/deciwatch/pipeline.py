"""Whole-sequence recovery with the trained model or an interpolation baseline."""

from __future__ import annotations

import numpy as np

from .interpolation import SparseSeries, densify
from .metrics import MetricsReport, evaluate, flops_model
from .posedata import PoseSequence, slice_windows, stitch_windows
from .sampling import make_plan
from .training import Checkpoint, build_windows


def recover_sequence(ckpt: Checkpoint, noisy: PoseSequence, strategy: str = "uniform",
                     seed: int = 0, label_mode: bool = False) -> PoseSequence:
    """Run the model window by window over ``noisy`` and stitch the result."""
    cfg = ckpt.config
    batch = build_windows(noisy, noisy, cfg.N, cfg.Q, strategy, seed)
    _, rec = ckpt.model().predict(batch.noisy_sampled, label_mode=label_mode)
    full = stitch_windows(batch.windows, list(rec), noisy.T)
    return noisy.replace_coords(full)


def baseline_sequence(noisy: PoseSequence, method: str, N: int, Q: int,
                      strategy: str = "uniform", seed: int = 0) -> PoseSequence:
    """Interpolate each window from its sampled frames of ``noisy``."""
    flat = noisy.flat()
    windows = slice_windows(noisy, N, Q)
    outs = []
    for w in windows:
        idx = make_plan(strategy, w.length, N, seed=seed, window_start=w.start).array()
        outs.append(densify(SparseSeries(idx, flat[w.start + idx]), method, w.length))
    return noisy.replace_coords(stitch_windows(windows, outs, noisy.T))


def deciwatch_flops(ckpt: Checkpoint, f_E: float) -> float:
    f_D, f_R = ckpt.model().flops_per_frame()
    return flops_model(f_E, f_D, f_R, ckpt.config.N)["total"]


def compare_methods(noisy: PoseSequence, gt: PoseSequence, N: int, Q: int, methods,
                    ckpt: Checkpoint | None = None, f_E: float = 0.0,
                    strategy: str = "uniform", seed: int = 0,
                    label_mode: bool = False) -> list[MetricsReport]:
    """One report per method at interval ``N``; ``"deciwatch"`` needs ``ckpt``."""
    reports = []
    ratio = 1.0 / N
    for method in methods:
        if method == "deciwatch":
            pred = recover_sequence(ckpt, noisy, strategy, seed, label_mode)
            flops = deciwatch_flops(ckpt, f_E)
        else:
            pred = baseline_sequence(noisy, method, N, Q, strategy, seed)
            flops = flops_model(f_E, 0.0, 0.0, N)["total"]
        reports.append(evaluate(method, pred, gt, N, ratio, flops, bbox=gt.bbox))
    return reports


def raw_report(noisy: PoseSequence, gt: PoseSequence, f_E: float = 0.0) -> MetricsReport:
    """Metrics of the estimator output itself, every frame watched."""
    return evaluate("estimator", noisy, gt, 1, 1.0, f_E, bbox=gt.bbox)
