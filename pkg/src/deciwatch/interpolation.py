"""Classical interpolation baselines: nearest, linear, quadratic, natural cubic spline.

Every coordinate is an independent scalar series; values are arrays of shape
``(P, F)`` sampled at ``P`` strictly increasing positions. Query functions
accept a scalar frame index (returning a length-``F`` vector) or an array of
indices (returning ``(q, F)``). At a sample position every method returns
the stored value exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError, RangeError

METHODS = ("nearest", "linear", "quadratic", "cubic")


@dataclass(frozen=True, eq=False)
class SparseSeries:
    positions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        vals = vals.reshape(vals.shape[0], -1)
        if pos.size == 0:
            raise ConfigError("a sparse series needs at least one sample")
        if vals.shape[0] != pos.size:
            raise ConfigError(f"{pos.size} positions but {vals.shape[0]} value rows")
        if np.any(np.diff(pos) <= 0):
            raise ConfigError("sample positions must be strictly increasing")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.positions.size


def _queries(t):
    arr = np.asarray(t, dtype=np.float64)
    return arr.reshape(-1), arr.ndim == 0


def _check_range(s: SparseSeries, t: np.ndarray) -> None:
    lo, hi = s.positions[0], s.positions[-1]
    if t.size and (t.min() < lo or t.max() > hi):
        raise RangeError(f"query outside sampled range [{lo:g}, {hi:g}]")


def _snap_to_samples(s: SparseSeries, t: np.ndarray, out: np.ndarray) -> np.ndarray:
    # exact reproduction of stored values at sample positions
    idx = np.searchsorted(s.positions, t)
    idx = np.clip(idx, 0, len(s) - 1)
    hit = s.positions[idx] == t
    out[hit] = s.values[idx[hit]]
    return out


def _finish(out, scalar):
    return out[0] if scalar else out


def interp_nearest(s: SparseSeries, t):
    """Value of the closest sample; equidistant queries take the earlier one."""
    q, scalar = _queries(t)
    pos = s.positions
    right = np.clip(np.searchsorted(pos, q, side="left"), 0, len(s) - 1)
    left = np.clip(right - 1, 0, len(s) - 1)
    take_left = np.abs(q - pos[left]) <= np.abs(pos[right] - q)
    idx = np.where(take_left, left, right)
    return _finish(s.values[idx].copy(), scalar)


def interp_linear(s: SparseSeries, t):
    q, scalar = _queries(t)
    if len(s) < 2:
        raise ConfigError("linear interpolation needs at least 2 samples")
    _check_range(s, q)
    pos = s.positions
    seg = np.clip(np.searchsorted(pos, q, side="right") - 1, 0, len(s) - 2)
    w = ((q - pos[seg]) / (pos[seg + 1] - pos[seg]))[:, None]
    out = s.values[seg] * (1.0 - w) + s.values[seg + 1] * w
    return _finish(_snap_to_samples(s, q, out), scalar)


def _lagrange3(x, y, q):
    """Quadratic through the three points ``(x[i], y[i])`` evaluated at ``q``."""
    x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
    l0 = (q - x1) * (q - x2) / ((x0 - x1) * (x0 - x2))
    l1 = (q - x0) * (q - x2) / ((x1 - x0) * (x1 - x2))
    l2 = (q - x0) * (q - x1) / ((x2 - x0) * (x2 - x1))
    return l0[:, None] * y[:, 0] + l1[:, None] * y[:, 1] + l2[:, None] * y[:, 2]


def interp_quadratic(s: SparseSeries, t):
    """Piecewise quadratic through consecutive sample triples.

    A query uses the triple whose middle sample is nearest to it (earlier
    triple on ties).
    """
    q, scalar = _queries(t)
    if len(s) < 3:
        raise ConfigError("quadratic interpolation needs at least 3 samples")
    _check_range(s, q)
    mids = s.positions[1:-1]
    right = np.clip(np.searchsorted(mids, q, side="left"), 0, mids.size - 1)
    left = np.clip(right - 1, 0, mids.size - 1)
    centre = np.where(np.abs(q - mids[left]) <= np.abs(mids[right] - q), left, right) + 1
    tri = centre[:, None] + np.array([-1, 0, 1])
    out = _lagrange3(s.positions[tri], s.values[tri], q)
    return _finish(_snap_to_samples(s, q, out), scalar)


def natural_spline_second_derivatives(positions, values) -> np.ndarray:
    """Second derivatives at the knots of the natural cubic spline.

    Solves the tridiagonal continuity system for the interior knots with the
    boundary second derivatives fixed at zero.
    """
    x = np.asarray(positions, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64).reshape(x.size, -1)
    n = x.size
    m2 = np.zeros_like(y)
    if n < 3:
        return m2
    h = np.diff(x)
    slope = np.diff(y, axis=0) / h[:, None]
    rhs = 6.0 * (slope[1:] - slope[:-1])
    diag = 2.0 * (h[:-1] + h[1:])
    sub = np.concatenate([[0.0], h[1:-1]])
    sup = np.concatenate([h[1:-1], [0.0]])
    m2[1:-1] = _kernels.solve_tridiagonal(sub, diag, sup, rhs)
    return m2


class NaturalCubicSpline:
    """Natural cubic spline (zero curvature at both ends) through a series."""

    def __init__(self, s: SparseSeries):
        if len(s) < 2:
            raise ConfigError("cubic spline needs at least 2 samples")
        self.series = s
        self.m2 = natural_spline_second_derivatives(s.positions, s.values)

    def __call__(self, t):
        q, scalar = _queries(t)
        _check_range(self.series, q)
        out = _kernels.cubic_eval(self.series.positions, self.series.values, self.m2, q)
        return _finish(_snap_to_samples(self.series, q, out), scalar)

    def segment_coefficients(self, i: int) -> np.ndarray:
        """Power-basis coefficients ``(4, F)`` of segment ``i`` in ``u = t - x_i``:
        ``c0 + c1 u + c2 u^2 + c3 u^3``."""
        x, y, m = self.series.positions, self.series.values, self.m2
        h = x[i + 1] - x[i]
        c0 = y[i]
        c1 = (y[i + 1] - y[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0
        c2 = m[i] / 2.0
        c3 = (m[i + 1] - m[i]) / (6.0 * h)
        return np.stack([c0, c1, c2, c3])


def interp_cubic_spline(s: SparseSeries, t):
    return NaturalCubicSpline(s)(t)


_DISPATCH = {
    "nearest": interp_nearest,
    "linear": interp_linear,
    "quadratic": interp_quadratic,
    "cubic": interp_cubic_spline,
}


def densify(s: SparseSeries, method: str, window_length: int) -> np.ndarray:
    """Values for every frame ``0 .. window_length - 1`` from a sparse series
    whose first and last samples are frames 0 and ``window_length - 1``."""
    if method not in _DISPATCH:
        raise ConfigError(f"unknown interpolation method {method!r}; expected one of {METHODS}")
    if s.positions[0] != 0 or s.positions[-1] != window_length - 1:
        raise ConfigError("first and last frames of the window must be sampled")
    frames = np.arange(window_length, dtype=np.float64)
    return _DISPATCH[method](s, frames)


def linear_weights(positions, window_length: int) -> np.ndarray:
    """``window_length x P`` matrix ``W`` with ``W @ values`` equal to linear
    densification of samples at ``positions``."""
    pos = np.asarray(positions, dtype=np.float64)
    eye = np.eye(pos.size)
    return densify(SparseSeries(pos, eye), "linear", window_length)
