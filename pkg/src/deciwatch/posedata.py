"""Pose sequences, window slicing, synthetic motion and the POSEv1 file format."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ParseError, SequenceTooShortError

UNITS = ("mm", "px")


@dataclass(frozen=True, eq=False)
class PoseSequence:
    """``T x K x D`` joint coordinates (mm for 3D, px for 2D).

    ``bbox`` holds one bounding-box size per frame in pixels and is only
    meaningful for 2D data; PCK needs it.
    """

    coords: np.ndarray
    fps: float = 30.0
    units: str = "mm"
    bbox: np.ndarray | None = None

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64)
        if coords.ndim != 3:
            raise ConfigError(f"coords must be T x K x D, got shape {coords.shape}")
        if coords.shape[2] not in (2, 3):
            raise ConfigError(f"D must be 2 or 3, got {coords.shape[2]}")
        if not np.all(np.isfinite(coords)):
            bad = np.argwhere(~np.isfinite(coords))[0]
            raise ConfigError(f"non-finite coordinate at index {tuple(int(i) for i in bad)}")
        if self.units not in UNITS:
            raise ConfigError(f"units must be one of {UNITS}, got {self.units!r}")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        if self.bbox is not None:
            bbox = np.array(self.bbox, dtype=np.float64).reshape(-1)
            if bbox.shape[0] != coords.shape[0]:
                raise ConfigError(f"bbox has {bbox.shape[0]} entries for {coords.shape[0]} frames")
            if not np.all(np.isfinite(bbox)):
                raise ConfigError("non-finite bbox size")
            bbox.setflags(write=False)
            object.__setattr__(self, "bbox", bbox)

    @property
    def T(self) -> int:
        return self.coords.shape[0]

    @property
    def K(self) -> int:
        return self.coords.shape[1]

    @property
    def D(self) -> int:
        return self.coords.shape[2]

    def flat(self) -> np.ndarray:
        """Frames as rows of ``K*D`` joint-major coordinates."""
        return self.coords.reshape(self.T, -1)

    def replace_coords(self, coords) -> "PoseSequence":
        coords = np.asarray(coords, dtype=np.float64).reshape(self.coords.shape)
        return PoseSequence(coords, fps=self.fps, units=self.units, bbox=self.bbox)

    def __eq__(self, other):
        if not isinstance(other, PoseSequence):
            return NotImplemented
        same_bbox = (self.bbox is None and other.bbox is None) or (
            self.bbox is not None and other.bbox is not None
            and np.array_equal(self.bbox, other.bbox))
        return (self.fps == other.fps and self.units == other.units and same_bbox
                and self.coords.shape == other.coords.shape
                and np.array_equal(self.coords, other.coords))


# ---------------------------------------------------------------------------
# windows


@dataclass(frozen=True)
class Window:
    start: int
    length: int
    interval: int

    @property
    def stop(self) -> int:
        return self.start + self.length

    @property
    def visible_count(self) -> int:
        return (self.length - 1) // self.interval + 1

    @property
    def frames(self) -> range:
        return range(self.start, self.stop)


def slice_windows(frames: int | PoseSequence, N: int, Q: int) -> list[Window]:
    """Tile ``frames`` with non-overlapping windows of ``N*Q + 1`` frames.

    When frames remain after the last full window, one extra window is
    anchored to end at the final frame; it overlaps its predecessor and its
    outputs win in the overlap (see :func:`stitch_windows`).
    """
    T = frames.T if isinstance(frames, PoseSequence) else int(frames)
    if N < 1 or Q < 1:
        raise ConfigError(f"N and Q must be >= 1, got N={N}, Q={Q}")
    length = N * Q + 1
    if T < length:
        raise SequenceTooShortError(T, length)
    windows = [Window(s, length, N) for s in range(0, T - length + 1, length)]
    if windows[-1].stop < T:
        windows.append(Window(T - length, length, N))
    return windows


def stitch_windows(windows: list[Window], outputs, T: int) -> np.ndarray:
    """Assemble per-window outputs into a length-``T`` sequence; later windows
    overwrite earlier ones where they overlap."""
    first = np.asarray(outputs[0])
    out = np.full((T,) + first.shape[1:], np.nan)
    for w, o in zip(windows, outputs):
        out[w.start:w.stop] = o
    if np.isnan(out).any():
        raise ConfigError("windows do not cover the sequence")
    return out


# ---------------------------------------------------------------------------
# synthetic motion

MOTION_KINDS = ("constant", "linear", "quadratic", "sinusoidal", "mixed")
_KIND_ALIASES = {"sinusoid": "sinusoidal", "sine": "sinusoidal", "mixed-frequency": "mixed"}


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic pose sequence plus estimator-like noise.

    Per-joint parameters left as ``None`` are drawn from ``seed``. Frequencies
    are in Hz and combined with ``fps``. ``outlier_rate`` is the probability
    that a (frame, joint) gets an extra displacement of length
    ``outlier_magnitude`` in a random direction.
    """

    kind: str = "sinusoidal"
    amplitude: float | np.ndarray = 100.0
    frequency: float | np.ndarray | None = None
    phase: float | np.ndarray | None = None
    freq_range: tuple[float, float] = (0.25, 0.75)
    sigma: float = 0.0
    outlier_rate: float = 0.0
    outlier_magnitude: float = 0.0
    seed: int = 0
    fps: float = 30.0
    units: str = "mm"
    extent: float = 500.0

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind, self.kind)
        if kind not in MOTION_KINDS:
            raise ConfigError(f"unknown motion kind {self.kind!r}; expected one of {MOTION_KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise ConfigError("outlier_rate must be in [0, 1]")
        if self.outlier_magnitude < 0:
            raise ConfigError("outlier_magnitude must be >= 0")


def _per_joint(value, default, shape):
    if value is None:
        return default
    return np.broadcast_to(np.asarray(value, dtype=np.float64), shape).copy()


def generate_synthetic(spec: SyntheticSpec, T: int, K: int, D: int):
    """Return ``(clean, noisy)`` pose sequences for ``spec``.

    Motion parameters and noise use separate child streams of ``spec.seed``
    so that changing the noise model leaves the clean motion unchanged.
    """
    if D not in (2, 3):
        raise ConfigError(f"D must be 2 or 3, got {D}")
    motion_ss, noise_ss = np.random.SeedSequence(spec.seed).spawn(2)
    rng = np.random.default_rng(motion_ss)
    shape = (K, D)
    base = rng.uniform(-0.5, 0.5, shape) * spec.extent
    amp = _per_joint(spec.amplitude, None, shape) * rng.uniform(0.5, 1.0, shape)
    freq = _per_joint(spec.frequency, rng.uniform(*spec.freq_range, shape), shape)
    phase = _per_joint(spec.phase, rng.uniform(0.0, 2.0 * math.pi, shape), shape)
    t = np.arange(T, dtype=np.float64)[:, None, None]

    if spec.kind == "constant":
        clean = np.broadcast_to(base, (T, K, D)).copy()
    elif spec.kind == "linear":
        clean = base + amp / max(T - 1, 1) * t
    elif spec.kind == "quadratic":
        clean = base + amp / max(T - 1, 1) ** 2 * t * t
    elif spec.kind == "sinusoidal":
        clean = base + amp * np.sin(2.0 * math.pi * freq / spec.fps * t + phase)
    else:
        freq2 = rng.uniform(*spec.freq_range, shape) * 2.5
        phase2 = rng.uniform(0.0, 2.0 * math.pi, shape)
        clean = (base + 0.7 * amp * np.sin(2.0 * math.pi * freq / spec.fps * t + phase)
                 + 0.3 * amp * np.sin(2.0 * math.pi * freq2 / spec.fps * t + phase2))

    noisy = clean.copy()
    nrng = np.random.default_rng(noise_ss)
    if spec.sigma > 0:
        noisy += nrng.normal(0.0, spec.sigma, noisy.shape)
    if spec.outlier_rate > 0 and spec.outlier_magnitude > 0:
        hit = nrng.random((T, K)) < spec.outlier_rate
        direction = nrng.normal(size=(T, K, D))
        direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
        noisy += hit[..., None] * spec.outlier_magnitude * direction

    bbox = None
    if D == 2:
        bbox = bbox_sizes(clean)
    return (PoseSequence(clean, fps=spec.fps, units=spec.units, bbox=bbox),
            PoseSequence(noisy, fps=spec.fps, units=spec.units, bbox=bbox))


def bbox_sizes(coords: np.ndarray) -> np.ndarray:
    """Per-frame ``max(width, height)`` of the tight box around the joints."""
    span = coords.max(axis=1) - coords.min(axis=1)
    return span[:, :2].max(axis=1)


# ---------------------------------------------------------------------------
# POSEv1 text format


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_pose_file(seq: PoseSequence, path: str | os.PathLike) -> None:
    lines = [f"POSEv1 T={seq.T} K={seq.K} D={seq.D} fps={_fmt(seq.fps)} units={seq.units}"]
    if seq.bbox is not None:
        lines.append("BBOX " + " ".join(_fmt(v) for v in seq.bbox))
    for row in seq.flat():
        lines.append(" ".join(_fmt(v) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_floats(tokens, lineno):
    try:
        vals = np.array([float(tok) for tok in tokens], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"bad number ({exc})", lineno) from None
    return vals


def read_pose_file(path: str | os.PathLike) -> PoseSequence:
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    head = lines[0].split()
    if not head or head[0] != "POSEv1":
        found = head[0] if head else ""
        raise ParseError(f"expected version tag POSEv1, found {found!r}", 1)
    fields = {}
    for tok in head[1:]:
        key, sep, val = tok.partition("=")
        if not sep:
            raise ParseError(f"malformed header field {tok!r}", 1)
        fields[key] = val
    try:
        T, K, D = int(fields["T"]), int(fields["K"]), int(fields["D"])
        fps = float(fields.get("fps", "30"))
        units = fields.get("units", "mm")
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad or missing header field: {exc}", 1) from None
    if T < 0 or K < 1 or D not in (2, 3):
        raise ParseError(f"inconsistent shape T={T} K={K} D={D}", 1)

    body = 1
    bbox = None
    if len(lines) > 1 and lines[1].startswith("BBOX"):
        bbox = _parse_floats(lines[1].split()[1:], 2)
        if bbox.shape[0] != T:
            raise ParseError(f"BBOX has {bbox.shape[0]} values, expected {T}", 2)
        if not np.all(np.isfinite(bbox)):
            raise ParseError(f"non-finite bbox value at frame {int(np.argmax(~np.isfinite(bbox)))}", 2)
        body = 2

    rows = [ln for ln in lines[body:]]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != T:
        raise ParseError(f"expected {T} frame lines, found {len(rows)}", body + len(rows) + 1)
    coords = np.empty((T, K * D))
    for i, ln in enumerate(rows):
        lineno = body + i + 1
        vals = _parse_floats(ln.split(), lineno)
        if vals.shape[0] != K * D:
            raise ParseError(f"expected {K * D} values, found {vals.shape[0]}", lineno)
        if not np.all(np.isfinite(vals)):
            j = int(np.argmax(~np.isfinite(vals)))
            raise ParseError(
                f"non-finite coordinate at frame {i}, joint {j // D}, dim {j % D} (offset {j})",
                lineno)
        coords[i] = vals
    try:
        return PoseSequence(coords.reshape(T, K, D), fps=fps, units=units, bbox=bbox)
    except ConfigError as exc:
        raise ParseError(str(exc), 1) from None
