"""Accuracy, smoothness and efficiency metrics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError

PCK_ALPHAS = (0.2, 0.1, 0.05)
REPORT_COLUMNS = ("method", "ratio", "N", "mpjpe", "accel",
                  "pck@0.2", "pck@0.1", "pck@0.05", "flops_G")


def _coords(x) -> np.ndarray:
    arr = getattr(x, "coords", x)
    return np.asarray(arr, dtype=np.float64)


def _same_shape(pred, gt):
    p, g = _coords(pred), _coords(gt)
    if p.shape != g.shape:
        raise DimensionError(f"prediction {p.shape} and ground truth {g.shape} differ")
    if p.ndim != 3:
        raise DimensionError(f"expected T x K x D arrays, got {p.shape}")
    return p, g


def mpjpe(pred, gt) -> float:
    """Mean over frames and joints of the Euclidean joint error."""
    p, g = _same_shape(pred, gt)
    return float(np.linalg.norm(p - g, axis=-1).mean())


def second_difference(x: np.ndarray) -> np.ndarray:
    """``x[t+1] - 2 x[t] + x[t-1]`` for every interior frame."""
    return x[2:] - 2.0 * x[1:-1] + x[:-2]


def accel_error(pred, gt) -> float:
    """Mean norm of the difference of per-joint second differences
    (units per frame squared)."""
    p, g = _same_shape(pred, gt)
    if p.shape[0] < 3:
        raise ConfigError(f"acceleration needs at least 3 frames, got {p.shape[0]}")
    return float(np.linalg.norm(second_difference(p) - second_difference(g), axis=-1).mean())


def pck(pred, gt, bbox_size, alpha: float) -> float:
    """Percentage of joints within ``alpha * bbox_size`` of the ground truth."""
    p, g = _same_shape(pred, gt)
    if p.shape[-1] != 2:
        raise ConfigError("PCK is defined for 2D poses")
    if bbox_size is None:
        raise ConfigError("PCK needs per-frame bounding-box sizes")
    box = np.broadcast_to(np.asarray(bbox_size, dtype=np.float64).reshape(-1), (p.shape[0],))
    if np.any(box <= 0):
        raise ConfigError("bounding-box sizes must be positive")
    dist = np.linalg.norm(p - g, axis=-1)
    return float(100.0 * np.mean(dist <= alpha * box[:, None]))


def flops_model(f_E: float, f_D: float, f_R: float, N: int) -> dict[str, float]:
    """Per-frame cost when the estimator runs on one frame in ``N`` and both
    subnets run on every frame: ``f_E / N + f_D + f_R``."""
    if N < 1:
        raise ConfigError(f"sampling interval must be >= 1, got {N}")
    if min(f_E, f_D, f_R) < 0:
        raise ConfigError("FLOPs terms must be non-negative")
    estimator = f_E / N
    return {"estimator": estimator, "denoise": f_D, "recover": f_R,
            "total": estimator + f_D + f_R}


@dataclass
class MetricsReport:
    method: str
    ratio: float
    N: int
    mpjpe: float
    accel: float
    pck: dict = field(default_factory=dict)
    flops_G: float = 0.0
    frames: int = 0

    def row(self) -> dict:
        out = {"method": self.method, "ratio": f"{self.ratio:.6g}", "N": self.N,
               "mpjpe": f"{self.mpjpe:.6f}", "accel": f"{self.accel:.6f}",
               "flops_G": f"{self.flops_G:.6g}"}
        for a in PCK_ALPHAS:
            v = self.pck.get(a)
            out[f"pck@{a:g}"] = "" if v is None else f"{v:.4f}"
        return out


def evaluate(method: str, pred, gt, N: int, ratio: float | None = None,
             flops_G: float = 0.0, bbox=None) -> MetricsReport:
    p, g = _same_shape(pred, gt)
    bbox = getattr(gt, "bbox", None) if bbox is None else bbox
    pcks = {}
    if p.shape[-1] == 2 and bbox is not None:
        pcks = {a: pck(p, g, bbox, a) for a in PCK_ALPHAS}
    return MetricsReport(method, 1.0 / N if ratio is None else ratio, N, mpjpe(p, g),
                         accel_error(p, g), pcks, flops_G, p.shape[0])


def reports_to_csv(reports, extra_columns=(), extras=None) -> str:
    """Fixed-column CSV text; ``extras`` holds one dict per report for
    additional leading columns (sweep parameters, status)."""
    buf = io.StringIO()
    cols = list(extra_columns) + list(REPORT_COLUMNS)
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for i, rep in enumerate(reports):
        row = dict(extras[i]) if extras else {}
        if rep is not None:
            row.update(rep.row())
        writer.writerow({c: row.get(c, "") for c in cols})
    return buf.getvalue()


def format_table(reports) -> str:
    rows = [r.row() for r in reports]
    widths = {c: max([len(c)] + [len(str(r[c])) for r in rows]) for c in REPORT_COLUMNS}
    line = "  ".join(c.rjust(widths[c]) for c in REPORT_COLUMNS)
    out = [line, "-" * len(line)]
    for r in rows:
        out.append("  ".join(str(r[c]).rjust(widths[c]) for c in REPORT_COLUMNS))
    return "\n".join(out)
