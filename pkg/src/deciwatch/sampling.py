"""Frame-sampling plans: which frames of a window the pose estimator watches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

STRATEGIES = ("uniform", "u2", "u3", "random", "umix")


@dataclass(frozen=True)
class SamplingPlan:
    strategy: str
    interval: int
    window_length: int
    indices: tuple[int, ...]
    seed: int | None = None

    def __post_init__(self):
        idx = self.indices
        if list(idx) != sorted(set(idx)):
            raise ConfigError("plan indices must be sorted and unique")
        if idx and (idx[0] < 0 or idx[-1] >= self.window_length):
            raise ConfigError("plan indices out of window range")

    @property
    def ratio(self) -> float:
        return len(self.indices) / self.window_length

    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)


def plan_uniform(window_length: int, N: int) -> SamplingPlan:
    """Watch one frame in every ``N``: ``0, N, 2N, ..., window_length - 1``."""
    if N < 1 or window_length < 1 or (window_length - 1) % N:
        raise ConfigError(
            f"window length {window_length} is not of the form N*Q+1 for N={N}")
    return SamplingPlan("uniform", N, window_length, tuple(range(0, window_length, N)))


def plan_burst(window_length: int, N: int, burst: int) -> SamplingPlan:
    """Runs of ``burst`` consecutive frames every ``burst * N`` frames.

    ``N`` is the uniform interval giving the target ratio. The visible budget
    is the uniform count ``(window_length - 1) // N + 1``; runs are laid out
    from frame 0 until the budget less one is used, then the last frame is
    added, so both window ends are always visible.
    """
    if burst < 1 or (burst > 1 and burst >= N):
        raise ConfigError(f"burst={burst} must be >= 1 and smaller than N={N}")
    if N < 1 or window_length < 2:
        raise ConfigError(f"invalid window length {window_length} / N={N}")
    budget = (window_length - 1) // N + 1
    last = window_length - 1
    chosen = []
    for anchor in range(0, last, burst * N):
        for f in range(anchor, min(anchor + burst, last)):
            if len(chosen) < budget - 1:
                chosen.append(f)
    chosen.append(last)
    name = "uniform" if burst == 1 else f"u{burst}"
    return SamplingPlan(name, N, window_length, tuple(chosen))


def window_seed(seed: int, window_start: int) -> int:
    """Per-window seed for randomised plans, derived from the global seed."""
    return int(np.random.SeedSequence([seed, window_start]).generate_state(1)[0])


def plan_random(window_length: int, ratio: float, seed: int,
                mix_uniform: bool = False) -> SamplingPlan:
    """Random plan with ``round(ratio * (window_length - 1)) + 1`` visible frames.

    Both ends are always visible. With ``mix_uniform`` half the budget sits on
    a uniform grid of period ``2N`` (``N = round(1 / ratio)``) and the rest is
    drawn at random without replacement.
    """
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"ratio must be in (0, 1], got {ratio}")
    budget = int(round(ratio * (window_length - 1))) + 1
    if budget < 2 or window_length < 2:
        raise ConfigError(f"visible budget {budget} is below the two window endpoints")
    budget = min(budget, window_length)
    rng = np.random.default_rng(seed)
    last = window_length - 1
    fixed = {0, last}
    if mix_uniform:
        N = max(1, int(round(1.0 / ratio)))
        grid = list(range(0, window_length, 2 * N))
        for f in grid[: max(0, budget // 2)]:
            fixed.add(f)
    pool = np.array([f for f in range(window_length) if f not in fixed], dtype=np.int64)
    extra = max(0, budget - len(fixed))
    drawn = rng.choice(pool, size=min(extra, pool.size), replace=False) if extra else []
    indices = tuple(sorted(fixed | {int(f) for f in drawn}))
    N = max(1, int(round(1.0 / ratio)))
    return SamplingPlan("umix" if mix_uniform else "random", N, window_length, indices, seed)


def make_plan(strategy: str, window_length: int, N: int, seed: int = 0,
              window_start: int = 0) -> SamplingPlan:
    """Build a plan for a named strategy at the ratio of uniform interval ``N``."""
    if strategy == "uniform":
        return plan_uniform(window_length, N)
    if strategy in ("u2", "u3"):
        return plan_burst(window_length, N, int(strategy[1]))
    if strategy in ("random", "umix"):
        return plan_random(window_length, 1.0 / N, window_seed(seed, window_start),
                           mix_uniform=strategy == "umix")
    raise ConfigError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
