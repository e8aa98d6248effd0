import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deciwatch.errors import ConfigError, RangeError
from deciwatch.interpolation import (
    METHODS,
    NaturalCubicSpline,
    SparseSeries,
    densify,
    interp_cubic_spline,
    interp_linear,
    interp_nearest,
    interp_quadratic,
    linear_weights,
)


def series(pos, vals):
    return SparseSeries(np.array(pos, float), np.array(vals, float))


# --- nearest ----------------------------------------------------------------


def test_nearest_examples():
    s = series([0, 10], [1.0, 2.0])
    assert interp_nearest(s, 4)[0] == 1.0
    assert interp_nearest(s, 5)[0] == 1.0  # tie goes to the earlier sample
    assert interp_nearest(s, 6)[0] == 2.0
    assert interp_nearest(s, 10)[0] == 2.0


# --- linear -----------------------------------------------------------------


def test_linear_midpoint():
    assert interp_linear(series([0, 10], [0.0, 10.0]), 5)[0] == 5.0


def test_linear_fails_on_quadratic_truth():
    s = series([0, 10], [0.0, 100.0])
    value = interp_linear(s, 5)[0]
    assert value == 50.0
    assert abs(value - 25.0) == 25.0


def test_linear_rejects_extrapolation():
    with pytest.raises(RangeError):
        interp_linear(series([0, 10], [0.0, 1.0]), 11)


# --- quadratic --------------------------------------------------------------


def test_quadratic_exact_on_square():
    s = series([0, 1, 2], [0.0, 1.0, 4.0])
    assert interp_quadratic(s, 1.5)[0] == pytest.approx(2.25, abs=1e-14)


def test_quadratic_constant():
    s = series([0, 3, 7, 9], [2.5] * 4)
    np.testing.assert_allclose(interp_quadratic(s, np.arange(10.0)), 2.5, rtol=1e-14)


def test_quadratic_cubic_truth_against_lagrange_oracle():
    x = np.array([0.0, 5.0, 10.0])
    y = x ** 3
    # direct Lagrange formula, written independently of the module
    t = 2.5
    oracle = sum(y[i] * np.prod([(t - x[j]) / (x[i] - x[j]) for j in range(3) if j != i])
                 for i in range(3))
    assert interp_quadratic(SparseSeries(x, y), t)[0] == pytest.approx(oracle, rel=1e-14)
    assert oracle == pytest.approx(-31.25)  # 15 t^2 - 50 t


def test_quadratic_needs_three_samples():
    with pytest.raises(ConfigError):
        interp_quadratic(series([0, 1], [0.0, 1.0]), 0.5)


# --- natural cubic spline -----------------------------------------------------


def dense_spline_oracle(x, y, t):
    """Natural spline by a full linear solve over all segment coefficients."""
    n = len(x) - 1
    A = np.zeros((4 * n, 4 * n))
    b = np.zeros(4 * n)
    row = 0
    for i in range(n):  # interpolation at both ends of each segment
        for xi, yi in ((x[i], y[i]), (x[i + 1], y[i + 1])):
            A[row, 4 * i:4 * i + 4] = [1, xi, xi ** 2, xi ** 3]
            b[row] = yi
            row += 1
    for i in range(n - 1):  # first and second derivative continuity
        xi = x[i + 1]
        A[row, 4 * i:4 * i + 4] = [0, 1, 2 * xi, 3 * xi ** 2]
        A[row, 4 * i + 4:4 * i + 8] = [0, -1, -2 * xi, -3 * xi ** 2]
        row += 1
        A[row, 4 * i:4 * i + 4] = [0, 0, 2, 6 * xi]
        A[row, 4 * i + 4:4 * i + 8] = [0, 0, -2, -6 * xi]
        row += 1
    A[row, 0:4] = [0, 0, 2, 6 * x[0]]
    A[row + 1, 4 * n - 4:] = [0, 0, 2, 6 * x[-1]]
    coef = np.linalg.solve(A, b).reshape(n, 4)
    seg = min(int(np.searchsorted(x, t, side="right")) - 1, n - 1)
    c = coef[seg]
    return c[0] + c[1] * t + c[2] * t ** 2 + c[3] * t ** 3


def test_spline_hat_against_dense_oracle():
    x, y = np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 0.0])
    value = interp_cubic_spline(SparseSeries(x, y), 0.5)[0]
    assert value == pytest.approx(dense_spline_oracle(x, y, 0.5), abs=1e-12)
    assert value == pytest.approx(0.6875, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_spline_random_against_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.choice(np.arange(40), size=int(rng.integers(3, 9)), replace=False)).astype(float)
    y = rng.normal(size=x.size)
    s = SparseSeries(x, y)
    for t in rng.uniform(x[0], x[-1], 8):
        assert interp_cubic_spline(s, t)[0] == pytest.approx(dense_spline_oracle(x, y, t), abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_spline_is_c2_at_interior_knots(seed):
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.uniform(1, 4, 7))
    sp = NaturalCubicSpline(SparseSeries(x, rng.normal(size=(7, 3))))
    for i in range(1, 6):
        left, right = sp.segment_coefficients(i - 1), sp.segment_coefficients(i)
        h = x[i] - x[i - 1]
        # derivatives of c0 + c1 u + c2 u^2 + c3 u^3 at u = h versus u = 0
        d0 = left[0] + left[1] * h + left[2] * h ** 2 + left[3] * h ** 3
        d1 = left[1] + 2 * left[2] * h + 3 * left[3] * h ** 2
        d2 = 2 * left[2] + 6 * left[3] * h
        np.testing.assert_allclose(d0, right[0], atol=1e-9)
        np.testing.assert_allclose(d1, right[1], atol=1e-9)
        np.testing.assert_allclose(d2, 2 * right[2], atol=1e-9)
    ends = sp.segment_coefficients(0), sp.segment_coefficients(5)
    np.testing.assert_allclose(2 * ends[0][2], 0.0, atol=1e-12)
    h = x[6] - x[5]
    np.testing.assert_allclose(2 * ends[1][2] + 6 * ends[1][3] * h, 0.0, atol=1e-9)


# --- properties across methods ----------------------------------------------------


positions = st.lists(st.integers(0, 60), min_size=3, max_size=12, unique=True).map(sorted)


@settings(max_examples=50, deadline=None)
@given(positions, st.sampled_from(METHODS), st.integers(0, 2**31))
def test_passes_through_samples(pos, method, seed):
    vals = np.random.default_rng(seed).normal(size=(len(pos), 4))
    s = SparseSeries(np.array(pos, float), vals)
    fn = {"nearest": interp_nearest, "linear": interp_linear,
          "quadratic": interp_quadratic, "cubic": interp_cubic_spline}[method]
    assert np.array_equal(fn(s, np.array(pos, float)), vals)


@settings(max_examples=50, deadline=None)
@given(positions, st.floats(-50, 50), st.floats(-5, 5), st.floats(-0.5, 0.5))
def test_exactness_classes(pos, a, b, c):
    x = np.array(pos, float)
    q = np.linspace(x[0], x[-1], 23)
    line = SparseSeries(x, a + b * x)
    for fn in (interp_linear, interp_cubic_spline):
        np.testing.assert_allclose(fn(line, q)[:, 0], a + b * q, atol=1e-9)
    parab = SparseSeries(x, a + b * x + c * x ** 2)
    np.testing.assert_allclose(interp_quadratic(parab, q)[:, 0], a + b * q + c * q ** 2, atol=1e-8)


@pytest.mark.parametrize("method", METHODS)
def test_densify_equivariances(method):
    rng = np.random.default_rng(1)
    pos = np.array([0.0, 4, 9, 13, 20])
    vals = rng.normal(size=(5, 6))
    base = densify(SparseSeries(pos, vals), method, 21)
    shifted = densify(SparseSeries(pos, vals + 3.25), method, 21)
    scaled = densify(SparseSeries(pos, vals * -1.75), method, 21)
    np.testing.assert_allclose(shifted, base + 3.25, atol=1e-12)
    np.testing.assert_allclose(scaled, base * -1.75, atol=1e-12)


@pytest.mark.parametrize("method", METHODS)
def test_densify_all_sampled_is_identity(method):
    vals = np.random.default_rng(2).normal(size=(11, 3))
    out = densify(SparseSeries(np.arange(11.0), vals), method, 11)
    assert np.array_equal(out, vals)


def test_densify_requires_endpoints():
    with pytest.raises(ConfigError):
        densify(series([1, 10], [0.0, 1.0]), "linear", 11)
    with pytest.raises(ConfigError):
        densify(series([0, 10], [0.0, 1.0]), "sinc", 11)


def test_linear_densify_exact_on_linear_motion():
    frames = np.arange(101.0)
    truth = np.stack([2.0 + 0.5 * frames, -1.0 * frames], axis=1)
    for N in (2, 5, 10, 20):
        pos = np.arange(0, 101, N)
        for method in ("linear", "cubic"):
            out = densify(SparseSeries(pos, truth[pos]), method, 101)
            np.testing.assert_allclose(out, truth, atol=1e-9)


def test_spline_error_grows_with_interval():
    frames = np.arange(301.0)
    truth = np.sin(2 * np.pi * frames / 60.0) * 100.0
    errors = []
    for N in (2, 5, 10, 15, 20):
        pos = np.arange(0, 301, N)
        out = densify(SparseSeries(pos, truth[pos]), "cubic", 301)[:, 0]
        errors.append(np.abs(out - truth).mean())
    assert all(a < b for a, b in zip(errors, errors[1:]))


def test_linear_weights_reproduce_linear_densify():
    pos = np.array([0, 3, 10, 14, 20])
    vals = np.random.default_rng(4).normal(size=(5, 7))
    W = linear_weights(pos, 21)
    assert W.shape == (21, 5)
    np.testing.assert_allclose(W @ vals, densify(SparseSeries(pos, vals), "linear", 21),
                               rtol=0, atol=1e-12)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-15)
