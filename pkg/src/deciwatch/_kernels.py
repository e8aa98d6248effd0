"""Hot numeric kernels.

Every kernel exists twice: a loop version compiled with numba and a
vectorised pure-numpy version. Set ``DECIWATCH_NUMBA=0`` in the environment
(before import) to force the numpy path; it is also used automatically when
numba is not importable. Both paths are tested against each other and
compared in ``benchmarks/bench_kernels.py``.

The spline kernels use numba when it is enabled. The convolutions always run
as one im2col GEMM: BLAS beats the compiled loops there by about 3x at model
sizes, so the loop versions only serve as an independent cross-check.
"""

import os

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

USE_NUMBA = njit is not None and os.environ.get("DECIWATCH_NUMBA", "1") not in ("0", "false", "no")


def _jit(fn):
    if njit is None:
        return fn
    return njit(cache=True)(fn)


# ---------------------------------------------------------------------------
# tridiagonal solve (Thomas algorithm), many right-hand sides


@_jit
def _solve_tridiagonal_loops(sub, diag, sup, rhs):
    n, m = rhs.shape
    c = np.empty(n)
    d = np.empty((n, m))
    c[0] = sup[0] / diag[0] if n > 1 else 0.0
    for j in range(m):
        d[0, j] = rhs[0, j] / diag[0]
    for i in range(1, n):
        denom = diag[i] - sub[i] * c[i - 1]
        if i < n - 1:
            c[i] = sup[i] / denom
        for j in range(m):
            d[i, j] = (rhs[i, j] - sub[i] * d[i - 1, j]) / denom
    out = np.empty((n, m))
    for j in range(m):
        out[n - 1, j] = d[n - 1, j]
    for i in range(n - 2, -1, -1):
        for j in range(m):
            out[i, j] = d[i, j] - c[i] * out[i + 1, j]
    return out


def _solve_tridiagonal_numpy(sub, diag, sup, rhs):
    n = rhs.shape[0]
    c = np.empty(n)
    d = np.empty_like(rhs)
    c[0] = sup[0] / diag[0] if n > 1 else 0.0
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - sub[i] * c[i - 1]
        if i < n - 1:
            c[i] = sup[i] / denom
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom
    out = np.empty_like(rhs)
    out[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        out[i] = d[i] - c[i] * out[i + 1]
    return out


def solve_tridiagonal(sub, diag, sup, rhs):
    """Solve ``A x = rhs`` for tridiagonal ``A``, one column of ``rhs`` per system.

    ``sub[i]`` is ``A[i, i-1]`` (``sub[0]`` unused), ``sup[i]`` is ``A[i, i+1]``
    (``sup[-1]`` unused). No pivoting; callers pass diagonally dominant systems.
    """
    sub = np.ascontiguousarray(sub, dtype=np.float64)
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    sup = np.ascontiguousarray(sup, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    squeeze = rhs.ndim == 1
    if squeeze:
        rhs = rhs[:, None]
    fn = _solve_tridiagonal_loops if USE_NUMBA else _solve_tridiagonal_numpy
    out = fn(sub, diag, sup, rhs)
    return out[:, 0] if squeeze else out


# ---------------------------------------------------------------------------
# piecewise cubic evaluation for a spline given knot second derivatives


@_jit
def _cubic_eval_loops(knots, values, m2, t):
    n = knots.shape[0]
    q = t.shape[0]
    f = values.shape[1]
    out = np.empty((q, f))
    for i in range(q):
        x = t[i]
        # binary search for the segment [knots[s], knots[s+1]]
        lo = 0
        hi = n - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if knots[mid] <= x:
                lo = mid
            else:
                hi = mid
        s = lo
        h = knots[s + 1] - knots[s]
        a = knots[s + 1] - x
        b = x - knots[s]
        for j in range(f):
            out[i, j] = (
                m2[s, j] * a * a * a / (6.0 * h)
                + m2[s + 1, j] * b * b * b / (6.0 * h)
                + (values[s, j] / h - m2[s, j] * h / 6.0) * a
                + (values[s + 1, j] / h - m2[s + 1, j] * h / 6.0) * b
            )
    return out


def _cubic_eval_numpy(knots, values, m2, t):
    seg = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, knots.shape[0] - 2)
    h = (knots[seg + 1] - knots[seg])[:, None]
    a = (knots[seg + 1] - t)[:, None]
    b = (t - knots[seg])[:, None]
    return (
        m2[seg] * a * a * a / (6.0 * h)
        + m2[seg + 1] * b * b * b / (6.0 * h)
        + (values[seg] / h - m2[seg] * h / 6.0) * a
        + (values[seg + 1] / h - m2[seg + 1] * h / 6.0) * b
    )


def cubic_eval(knots, values, m2, t):
    """Evaluate the cubic spline with knot values ``values`` and knot second
    derivatives ``m2`` at the query points ``t`` (shape ``(q,)``)."""
    knots = np.ascontiguousarray(knots, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    m2 = np.ascontiguousarray(m2, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    fn = _cubic_eval_loops if USE_NUMBA else _cubic_eval_numpy
    return fn(knots, values, m2, t)


# ---------------------------------------------------------------------------
# "same"-padded temporal convolution over (batch, length, channels)


@_jit
def _conv1d_loops(x, w):
    bsz, length, cin = x.shape
    ks, _, cout = w.shape
    pad = ks // 2
    out = np.zeros((bsz, length, cout))
    for b in range(bsz):
        for t in range(length):
            for j in range(ks):
                src = t + j - pad
                if src < 0 or src >= length:
                    continue
                for ci in range(cin):
                    xv = x[b, src, ci]
                    if xv == 0.0:
                        continue
                    for co in range(cout):
                        out[b, t, co] += xv * w[j, ci, co]
    return out


@_jit
def _conv1d_grad_input_loops(g, wt):
    # wt is the kernel as (ks, cout, cin) so the inner loop runs along memory
    bsz, length, cout = g.shape
    ks, _, cin = wt.shape
    pad = ks // 2
    out = np.zeros((bsz, length, cin))
    for b in range(bsz):
        for t in range(length):
            for j in range(ks):
                src = t + j - pad
                if src < 0 or src >= length:
                    continue
                for co in range(cout):
                    gv = g[b, t, co]
                    for ci in range(cin):
                        out[b, src, ci] += gv * wt[j, co, ci]
    return out


@_jit
def _conv1d_grad_weight_loops(x, g, ks):
    bsz, length, cin = x.shape
    cout = g.shape[2]
    pad = ks // 2
    out = np.zeros((ks, cin, cout))
    for b in range(bsz):
        for t in range(length):
            for j in range(ks):
                src = t + j - pad
                if src < 0 or src >= length:
                    continue
                for ci in range(cin):
                    xv = x[b, src, ci]
                    for co in range(cout):
                        out[j, ci, co] += xv * g[b, t, co]
    return out


def _conv1d_grad_input_numba(g, w):
    return _conv1d_grad_input_loops(g, np.ascontiguousarray(w.transpose(0, 2, 1)))


def _im2col(x, ks):
    # (B, L, C) -> (B, L, ks, C), zero padded on both ends
    pad = ks // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    cols = np.lib.stride_tricks.sliding_window_view(xp, ks, axis=1)
    return np.swapaxes(cols, 2, 3)


def _conv1d_numpy(x, w):
    ks = w.shape[0]
    cols = _im2col(x, ks).reshape(x.shape[0] * x.shape[1], -1)
    out = cols @ w.reshape(-1, w.shape[2])
    return out.reshape(x.shape[0], x.shape[1], w.shape[2])


def _conv1d_grad_input_numpy(g, w):
    ks, cin, _ = w.shape
    pad = ks // 2
    bsz, length, _ = g.shape
    gcols = (g @ w.reshape(-1, w.shape[2]).T).reshape(bsz, length, ks, cin)
    out = np.zeros((bsz, length + 2 * pad, cin))
    for j in range(ks):
        out[:, j : j + length] += gcols[:, :, j]
    return out[:, pad : pad + length]


def _conv1d_grad_weight_numpy(x, g, ks):
    cols = _im2col(x, ks).reshape(x.shape[0] * x.shape[1], -1)
    gw = cols.T @ g.reshape(-1, g.shape[2])
    return gw.reshape(ks, x.shape[2], g.shape[2])


def conv1d(x, w):
    """``out[b, t] = sum_j x[b, t + j - ks//2] @ w[j]`` with zero padding."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return _conv1d_numpy(x, w)


def conv1d_grad_input(g, w):
    g = np.ascontiguousarray(g, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return _conv1d_grad_input_numpy(g, w)


def conv1d_grad_weight(x, g, ks):
    x = np.ascontiguousarray(x, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    return _conv1d_grad_weight_numpy(x, g, ks)


# both variants by name, for tests and the benchmark
IMPLEMENTATIONS = {
    "solve_tridiagonal": (_solve_tridiagonal_loops, _solve_tridiagonal_numpy),
    "cubic_eval": (_cubic_eval_loops, _cubic_eval_numpy),
    "conv1d": (_conv1d_loops, _conv1d_numpy),
    "conv1d_grad_input": (_conv1d_grad_input_numba, _conv1d_grad_input_numpy),
    "conv1d_grad_weight": (_conv1d_grad_weight_loops, _conv1d_grad_weight_numpy),
}
