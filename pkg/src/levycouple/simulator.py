"""Compound-Poisson skeleton of the pure-jump process with characteristics (0, 0, ν).

Jumps with |x| ≤ eps are dropped. Because ν and the truncation are both
symmetric, no compensating drift is needed; the discarded part has
variance 2·η(eps) per unit time.

Paths are generated in consecutive time blocks of length
``block_length(measure, eps)`` (at most 1). Each block draws, in this
order from the replication's jump stream: the event count, the event
times, the tail uniforms and the sign uniforms. Blocks are always drawn
whole and events past the horizon are discarded afterwards, so a path on
[0, T] is exactly the prefix of the same replication's path on [0, T']
for any T' > T.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from levycouple.errors import DomainError
from levycouple.levy_measure import SymmetricLevyMeasure, eta, tail_mass

BLOCK_EVENTS = 1024
_U_MAX = 1.0 - 2.0 ** -53


@dataclass(frozen=True, eq=False)
class JumpPath:
    T: float
    eps: float
    times: np.ndarray
    jumps: np.ndarray

    def __len__(self):
        return len(self.times)

    @property
    def events(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.jumps.tolist()))

    @classmethod
    def from_events(cls, T, eps, events) -> "JumpPath":
        events = sorted(events)
        times = np.array([e[0] for e in events], dtype=float)
        jumps = np.array([e[1] for e in events], dtype=float)
        if np.any(np.diff(times) <= 0):
            raise DomainError("event times must be strictly increasing")
        if np.any(np.abs(jumps) <= eps):
            raise DomainError("every jump must exceed eps in magnitude")
        if len(times) and (times[0] <= 0 or times[-1] > T):
            raise DomainError("event times must lie in (0, T]")
        return cls(float(T), float(eps), times, jumps)


def replication_streams(seed: int, replication: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (jump, coin) generators for one replication of a seeded run."""
    jump_seq, coin_seq = np.random.SeedSequence(seed, spawn_key=(replication,)).spawn(2)
    return np.random.default_rng(jump_seq), np.random.default_rng(coin_seq)


def jump_rate(measure: SymmetricLevyMeasure, eps: float) -> float:
    """Two-sided intensity 2·N(eps) of jumps larger than eps."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    if eps >= measure.support_bound:
        return 0.0
    return 2.0 * float(tail_mass(measure, eps))


def block_length(measure: SymmetricLevyMeasure, eps: float) -> float:
    rate = jump_rate(measure, eps)
    return 1.0 if rate <= BLOCK_EVENTS else BLOCK_EVENTS / rate


def truncation_variance(measure: SymmetricLevyMeasure, eps: float, T: float = 1.0) -> float:
    """Variance 2·η(eps)·T of the dropped small jumps."""
    return 2.0 * float(eta(measure, eps)) * T


def eps_for_budget(measure: SymmetricLevyMeasure, budget: float = 1e-4) -> float:
    """Largest eps (to ~1e-12 in log scale) with 2·η(eps) ≤ budget."""
    lo, hi = -60.0, math.log(min(measure.support_bound, 1.0))
    if 2.0 * float(eta(measure, math.exp(hi))) <= budget:
        return math.exp(hi)
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if 2.0 * float(eta(measure, math.exp(mid))) <= budget:
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def block_edges(T: float, block: float) -> list[tuple[float, float]]:
    """Whole canonical blocks (start, length) needed to cover [0, T]."""
    out = []
    b = 0
    while b * block < T:
        out.append((b * block, block))
        b += 1
    return out


class _Sampler:
    """Per-(measure, eps) block sampler; caches N(eps)."""

    def __init__(self, measure: SymmetricLevyMeasure, eps: float):
        self.measure = measure
        self.eps = eps
        self.rate = jump_rate(measure, eps)
        self.top = self.rate / 2.0
        self.block = block_length(measure, eps)

    def raw(self, rng: np.random.Generator, start: float, length: float,
            cutoff: float = math.inf):
        """Times, tail uniforms and sign flags of one block, cut at ``cutoff``."""
        k = int(rng.poisson(self.rate * length)) if self.rate > 0 else 0
        times = start + length * np.sort(rng.random(k))
        u = np.minimum(1.0 - rng.random(k), _U_MAX)
        positive = rng.random(k) < 0.5
        keep = int(np.searchsorted(times, cutoff, side="right"))
        return times[:keep], u[:keep], positive[:keep]

    def signed(self, u: np.ndarray, positive: np.ndarray) -> np.ndarray:
        if u.size == 0:
            return np.zeros(0)
        mag = np.maximum(self.measure._inverse_tail(u * self.top), self.eps)
        return np.where(positive, mag, -mag)

    def draw(self, rng: np.random.Generator, start: float, length: float,
             cutoff: float = math.inf):
        """Events of one block, keeping those at times ≤ cutoff."""
        t, u, positive = self.raw(rng, start, length, cutoff)
        return t, self.signed(u, positive)

    def draw_many(self, rngs, start: float, length: float, cutoff: float = math.inf):
        """``draw`` for several streams with one inverse-tail evaluation."""
        raws = [self.raw(rng, start, length, cutoff) for rng in rngs]
        if not raws:
            return []
        x = self.signed(np.concatenate([r[1] for r in raws]),
                        np.concatenate([r[2] for r in raws]))
        cuts = np.cumsum([len(r[0]) for r in raws])[:-1]
        return [(r[0], xi) for r, xi in zip(raws, np.split(x, cuts))]

    def path(self, rng: np.random.Generator, T: float) -> JumpPath:
        ts, xs = [], []
        for start, length in block_edges(T, self.block):
            t, x = self.draw(rng, start, length, T)
            ts.append(t)
            xs.append(x)
        times = np.concatenate(ts) if ts else np.zeros(0)
        jumps = np.concatenate(xs) if xs else np.zeros(0)
        return JumpPath(float(T), self.eps, times, jumps)


def sample_path(measure: SymmetricLevyMeasure, eps: float, T: float,
                stream: np.random.Generator) -> JumpPath:
    if not T > 0:
        raise DomainError("T must be positive")
    return _Sampler(measure, eps).path(stream, T)


def terminal_value(path: JumpPath) -> float:
    return math.fsum(path.jumps) if len(path) else 0.0


def _terminal_chunk(args):
    measure, eps, T, seed, lo, hi = args
    sampler = _Sampler(measure, eps)
    rngs = [replication_streams(seed, rep)[0] for rep in range(lo, hi)]
    parts = [[] for _ in rngs]
    # pairwise sum within a block, exact sum across blocks; fsum over every
    # jump cost more than drawing them
    for start, length in block_edges(T, sampler.block):
        for i, (_, x) in enumerate(sampler.draw_many(rngs, start, length, T)):
            parts[i].append(float(np.sum(x)))
    return np.array([math.fsum(p) for p in parts])


def chunk_ranges(n: int, size: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def map_chunks(fn, tasks, workers: int = 1):
    """Apply ``fn`` to tasks, in order, optionally in a process pool."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def sample_terminal(measure: SymmetricLevyMeasure, eps: float, T: float, n: int,
                    seed: int, workers: int = 1) -> np.ndarray:
    """X_T of the truncated process for replications 0..n-1 of ``seed``."""
    if n < 1:
        raise DomainError("n must be positive")
    tasks = [(measure, eps, T, seed, lo, hi) for lo, hi in chunk_ranges(n, 1024)]
    return np.concatenate(map_chunks(_terminal_chunk, tasks, workers))


def sample_paths(measure: SymmetricLevyMeasure, eps: float, T: float, n: int,
                 seed: int) -> list[JumpPath]:
    sampler = _Sampler(measure, eps)
    return [sampler.path(replication_streams(seed, rep)[0], T) for rep in range(n)]
