"""Monte Carlo aggregation and goodness-of-fit helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from levycouple.errors import DomainError

Z95 = 1.96


class InsufficientData(DomainError):
    pass


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n: int
    ci95: tuple[float, float]

    @classmethod
    def normal(cls, mean: float, stderr: float, n: int) -> "MCEstimate":
        return cls(mean, stderr, n, (mean - Z95 * stderr, mean + Z95 * stderr))

    def contains(self, value: float) -> bool:
        lo, hi = self.ci95
        return lo <= value <= hi


class Accumulator:
    """Mergeable mean/variance accumulator.

    Each batch is reduced with exactly rounded sums (``math.fsum``) and
    batches are combined with the pairwise update of Chan, Golub & LeVeque,
    so the result does not depend on the order of values within a batch
    and merging is associative up to rounding.
    """

    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, values: Iterable[float]) -> "Accumulator":
        batch = np.asarray(list(values) if not hasattr(values, "__len__") else values,
                           dtype=float).ravel()
        if batch.size == 0:
            return self
        nb = batch.size
        mean_b = math.fsum(batch) / nb
        m2_b = math.fsum((batch - mean_b) ** 2)
        other = Accumulator()
        other.n, other.mean, other.m2 = nb, mean_b, m2_b
        return self.merge(other)

    def merge(self, other: "Accumulator") -> "Accumulator":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return self
        n = self.n + other.n
        d = other.mean - self.mean
        self.mean = (self.n * self.mean + other.n * other.mean) / n
        self.m2 = self.m2 + other.m2 + d * d * self.n * other.n / n
        self.n = n
        return self

    def estimate(self) -> MCEstimate:
        if self.n < 2:
            raise InsufficientData(f"need at least 2 values, got {self.n}")
        var = max(self.m2, 0.0) / (self.n - 1)
        return MCEstimate.normal(self.mean, math.sqrt(var / self.n), self.n)


def aggregate(values: Iterable[float]) -> MCEstimate:
    return Accumulator().add(values).estimate()


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


def proportion(successes: int, n: int) -> MCEstimate:
    """Binomial proportion; Wilson interval when fewer than 10 successes or failures."""
    if n < 2:
        raise InsufficientData(f"need at least 2 trials, got {n}")
    if not 0 <= successes <= n:
        raise DomainError("successes must lie in [0, n]")
    p = successes / n
    stderr = math.sqrt(p * (1.0 - p) / (n - 1))
    if successes < 10 or n - successes < 10:
        return MCEstimate(p, stderr, n, wilson_interval(successes, n))
    return MCEstimate.normal(p, stderr, n)


def ks_statistic(samples: Sequence[float], cdf: Callable) -> float:
    """Two-sided Kolmogorov–Smirnov distance between sorted samples and ``cdf``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise DomainError("ks_statistic needs at least one sample")
    if np.any(np.diff(x) < 0):
        raise DomainError("samples must be sorted")
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def nonincreasing_within(estimates: Sequence[MCEstimate], k: float = 2.0) -> bool:
    """True if each estimate is at most the previous one plus k combined sigmas."""
    for prev, cur in zip(estimates, estimates[1:]):
        slack = k * math.hypot(prev.stderr, cur.stderr)
        if cur.mean > prev.mean + slack:
            return False
    return True
