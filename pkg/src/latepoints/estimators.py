"""Late sets and the multifractal statistics computed from them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._backend import kernels
from .rng import sampling_rng
from .walk import FirstHitField

COVER_CONSTANT = 4.0 / math.pi


class InsufficientRun(ValueError):
    """The walk stopped before the lateness threshold, so lateness is undecided."""


@dataclass(frozen=True)
class LateSet:
    n: int
    alpha: float
    threshold: int
    points: np.ndarray  # (k, 2) int64, sorted by row-major index

    def __len__(self):
        return len(self.points)

    def __contains__(self, p):
        idx = p[0] * self.n + p[1]
        flat = self.points[:, 0] * self.n + self.points[:, 1]
        i = np.searchsorted(flat, idx)
        return bool(i < len(flat) and flat[i] == idx)


@dataclass
class ExponentFit:
    log_n: np.ndarray
    log_stat: np.ndarray
    slope: float
    intercept: float
    residual: float  # root-mean-square residual of the regression
    halfwidth: float  # 95% confidence half-width of the slope
    excluded: list = field(default_factory=list)  # (n, value) pairs dropped for value <= 0


@dataclass
class SeedSummary:
    values: np.ndarray
    median: float
    mean: float
    q1: float
    q3: float


def late_threshold(alpha: float, n: int) -> int:
    """``ceil(alpha * (4/pi) * (n ln n)^2)``."""
    if n < 2:
        raise ValueError("late threshold needs n >= 2")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return math.ceil(alpha * COVER_CONSTANT * (n * math.log(n)) ** 2)


def late_set(f: FirstHitField, alpha: float) -> LateSet:
    thr = late_threshold(alpha, f.n)
    # a covered field fixes every first-hit time, so lateness is decided
    if f.walk_length < thr and not f.covered:
        raise InsufficientRun(f"walk length {f.walk_length} is below the threshold {thr}")
    idx = np.flatnonzero(f.hits >= np.uint64(thr))
    pts = np.stack(np.divmod(idx, f.n), axis=1).astype(np.int64)
    return LateSet(f.n, alpha, thr, pts)


def wrapped_delta(n: int, x, y) -> np.ndarray:
    d = np.abs(np.asarray(x, dtype=np.int64) - np.asarray(y, dtype=np.int64)) % n
    return np.minimum(d, n - d)


def torus_distance(n: int, x, y):
    d = wrapped_delta(n, x, y)
    return np.sqrt((d * d).sum(axis=-1))


def _check_radius(n, radius):
    if radius > n / 2:
        raise ValueError(f"radius {radius} exceeds n/2 = {n / 2}")


def disc_r2(radius: float) -> int:
    """Largest integer ``k`` with ``sqrt(k) < radius`` (-1 if none).

    Working from ``sqrt(k)`` rather than ``radius**2`` keeps radii such as
    ``sqrt(50)`` exact despite rounding in the square.
    """
    if radius <= 0:
        return -1
    k = math.ceil(radius * radius)
    while k >= 0 and math.sqrt(k) >= radius:
        k -= 1
    while math.sqrt(k + 1) < radius:
        k += 1
    return k


def ball_r2(radius: float) -> int:
    """Largest integer ``k`` with ``sqrt(k) <= radius`` (-1 if none)."""
    if radius < 0:
        return -1
    k = math.floor(radius * radius)
    while k >= 0 and math.sqrt(k) > radius:
        k -= 1
    while math.sqrt(k + 1) <= radius:
        k += 1
    return k


def disc_count(s: LateSet, center, radius: float) -> int:
    """Points of ``s`` at torus distance ``< radius`` from ``center``."""
    _check_radius(s.n, radius)
    if len(s) == 0:
        return 0
    d = wrapped_delta(s.n, s.points, np.asarray(center)[None, :])
    return int(np.count_nonzero((d * d).sum(axis=1) <= disc_r2(radius)))


def pair_count(s: LateSet, radius: float) -> int:
    """Ordered pairs ``(x, y)`` of ``s``, diagonal included, with distance ``<= radius``."""
    _check_radius(s.n, radius)
    if len(s) == 0:
        return 0
    p = s.points.astype(np.int32)
    return int(kernels.pair_count(np.ascontiguousarray(p[:, 0]), np.ascontiguousarray(p[:, 1]),
                                  s.n, ball_r2(radius)))


def sample_late_point(s: LateSet, seed: int, tag: int = 0):
    """Uniform draw from ``s`` using the run's own sampling substream."""
    if len(s) == 0:
        return None
    i = sampling_rng(seed, tag).integers(len(s))
    return tuple(int(v) for v in s.points[i])


def exponent_fit(samples) -> ExponentFit:
    """Least-squares slope of ``ln(statistic)`` against ``ln(n)``.

    ``samples`` is an iterable of ``(n, statistic)``. Nonpositive statistics
    are dropped and reported in ``excluded``; at least three distinct ``n``
    must remain.
    """
    samples = list(samples)
    kept = [(n, v) for n, v in samples if v > 0]
    excluded = [(n, v) for n, v in samples if not v > 0]
    ns = sorted({n for n, _ in kept})
    if len(ns) < 3:
        raise ValueError(f"need >= 3 distinct n with positive statistics, got {ns}")
    x = np.log([n for n, _ in kept])
    y = np.log([v for _, v in kept])
    res = stats.linregress(x, y)
    dof = len(x) - 2
    fitted = res.intercept + res.slope * x
    rms = float(np.sqrt(np.mean((y - fitted) ** 2)))
    half = float(stats.t.ppf(0.975, dof) * res.stderr) if dof > 0 else math.inf
    return ExponentFit(x, y, float(res.slope), float(res.intercept), rms, half, excluded)


def summarize(values) -> SeedSummary:
    v = np.sort(np.asarray(list(values), dtype=float))
    if len(v) == 0:
        raise ValueError("cannot summarise an empty sample")
    lower_median = v[(len(v) - 1) // 2]
    q1, q3 = np.quantile(v, [0.25, 0.75], method="lower")
    return SeedSummary(v, float(lower_median), float(v.mean()), float(q1), float(q3))


def alpha_tag(alpha: float) -> int:
    """Sampling-substream tag for a given alpha (independent of list order)."""
    return int(round(alpha * 1_000_000))


def fixed_center(n: int) -> tuple[int, int]:
    """Nonrandom disc center used for fixed-center statistics: the antipode of the origin."""
    return (n // 2, n // 2)


def field_statistics(f: FirstHitField, alphas, betas) -> list[tuple]:
    """Per-field rows ``(alpha, beta, statistic, value)``.

    Statistics: ``late_count``; per beta ``fixed_disc``, ``late_disc`` and
    ``pair_count`` at radius ``n**beta``; and ``cover_ratio`` (``T_n/(n ln n)^2``)
    when the field is covered. Betas whose radius exceeds ``n/2`` are skipped.
    """
    rows = []
    if f.covered and f.n >= 2:
        rows.append((None, None, "cover_ratio", f.cover_time / (f.n * math.log(f.n)) ** 2))
    for a in alphas:
        s = late_set(f, a)
        rows.append((a, None, "late_count", len(s)))
        y = sample_late_point(s, f.seed, alpha_tag(a))
        for b in betas:
            r = f.n ** b
            if r > f.n / 2:
                continue
            rows.append((a, b, "fixed_disc", disc_count(s, fixed_center(f.n), r)))
            rows.append((a, b, "late_disc", disc_count(s, y, r) if y is not None else 0))
            rows.append((a, b, "pair_count", pair_count(s, r)))
    return rows
