"""Mirror coupling of two copies of the truncated Lévy process.

X̄ is the simulated process and Ȳ starts at a. At each jump ΔX of X̄, with
Z₋ = Ȳ₋ − X̄₋ the current gap:

* if Z₋/2 < |ΔX|, Ȳ makes the same jump and Z is unchanged;
* otherwise Ȳ jumps ξ·ΔX for a fair sign ξ, so ΔZ = (ξ − 1)·ΔX.

Exact hitting of 0 has probability zero for an atomless ν, so the pair is
declared coupled once Z ≤ δ, and Z is frozen from then on. τ̄ is the first
time Z ≤ δ or Z ≥ 1.

One fair coin per jump event is taken from the replication's coin
stream; it is only looked at when the event is mirrored (coin < ½ means
ξ = −1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from levycouple.errors import ConfigError, DomainError, InvariantViolation
from levycouple.levy_measure import SymmetricLevyMeasure, eta
from levycouple.simulator import (
    JumpPath,
    _Sampler,
    block_edges,
    chunk_ranges,
    map_chunks,
    replication_streams,
)
from levycouple.stats import Accumulator, MCEstimate, aggregate, proportion

INVARIANTS = ("nonnegative", "jump_bound", "exit_below_two")
CHUNK = 2048


@dataclass(frozen=True)
class CouplingResult:
    a: float
    coupled: bool
    tau_delta: float
    tau_bar: float
    z_at_tau_bar: float | None
    max_z: float
    mirrored_qv_neg: float
    z_final: float
    n_moves: int
    invariant_flags: dict = field(default_factory=lambda: dict.fromkeys(INVARIANTS, True))


def check_coupling_args(a: float, delta: float, eps: float) -> None:
    if not 0.0 < a < 1.0:
        raise ConfigError(f"initial gap a must lie in (0,1), got {a}")
    if not delta >= 2.0 * eps:
        raise ConfigError(f"delta={delta:g} must be at least 2*eps={2 * eps:g}")
    if not 0.0 < delta < a:
        raise ConfigError(f"delta={delta:g} must lie in (0, a={a:g})")


def run_coupling(path: JumpPath, coin_stream: np.random.Generator, a: float,
                 delta: float) -> CouplingResult:
    """Walk one path event by event; raises InvariantViolation on any breach."""
    check_coupling_args(a, delta, path.eps)
    coins = coin_stream.random(len(path))
    z = a
    max_z = a
    qv = 0.0
    moves = 0
    tau_delta = tau_bar = math.inf
    z_bar = None
    coupled = False
    for t, x, c in zip(path.times.tolist(), path.jumps.tolist(), coins.tolist()):
        if 0.5 * z < abs(x) or c >= 0.5:
            continue
        dz = -2.0 * x
        z_new = z + dz
        if z_new < 0.0:
            raise InvariantViolation(f"Z became negative at t={t}: {z_new}")
        if abs(dz) > z:
            raise InvariantViolation(f"|ΔZ|={abs(dz)} exceeds Z₋={z} at t={t}")
        if dz < 0.0:
            qv += dz * dz
        moves += 1
        z = z_new
        max_z = max(max_z, z)
        if z_bar is None and (z <= delta or z >= 1.0):
            tau_bar, z_bar = t, z
            if z >= 2.0:
                raise InvariantViolation(f"Z at exit is {z} ≥ 2")
        if z <= delta:
            coupled, tau_delta = True, t
            break
    return CouplingResult(a, coupled, tau_delta, tau_bar, z_bar, max_z, qv, z, moves)


@dataclass(eq=False)
class CouplingBatch:
    """Per-replication outcomes of a seeded batch; censored times are +inf."""

    a: float
    delta: float
    eps: float
    horizon: float
    coupled: np.ndarray
    tau_delta: np.ndarray
    tau_bar: np.ndarray
    z_at_tau_bar: np.ndarray
    max_z: np.ndarray
    qv_neg: np.ndarray
    z_observed: np.ndarray
    z_final: np.ndarray
    n_moves: np.ndarray
    violations: dict

    def __len__(self):
        return len(self.coupled)

    @property
    def exited(self) -> np.ndarray:
        return np.isfinite(self.tau_bar)

    def total_violations(self) -> int:
        return int(sum(self.violations.values()))

    def raise_on_violation(self) -> None:
        if self.total_violations():
            raise InvariantViolation(f"path-wise invariant violations: {self.violations}")

    def result(self, i: int) -> CouplingResult:
        zb = float(self.z_at_tau_bar[i])
        return CouplingResult(
            self.a, bool(self.coupled[i]), float(self.tau_delta[i]), float(self.tau_bar[i]),
            None if math.isnan(zb) else zb, float(self.max_z[i]), float(self.qv_neg[i]),
            float(self.z_final[i]), int(self.n_moves[i]))

    @classmethod
    def concat(cls, parts: list["CouplingBatch"]) -> "CouplingBatch":
        first = parts[0]
        arrays = {name: np.concatenate([getattr(p, name) for p in parts])
                  for name in ("coupled", "tau_delta", "tau_bar", "z_at_tau_bar", "max_z",
                               "qv_neg", "z_observed", "z_final", "n_moves")}
        violations = {k: sum(p.violations[k] for p in parts) for k in INVARIANTS}
        return cls(first.a, first.delta, first.eps, first.horizon, violations=violations, **arrays)


def _pad(rows, width):
    """Stack ragged (times, jumps, coins) rows; padding is inert (x=0, coin=1)."""
    m = len(rows)
    T = np.full((m, width), np.inf)
    X = np.zeros((m, width))
    C = np.ones((m, width))
    for i, (t, x, c) in enumerate(rows):
        k = len(t)
        T[i, :k], X[i, :k], C[i, :k] = t, x, c
    return T, X, C


def _run_chunk(args) -> CouplingBatch:
    (measure, a, delta, eps, horizon, seed, lo, hi, stop_at_exit, observe_at) = args
    m = hi - lo
    sampler = _Sampler(measure, eps)
    streams = [replication_streams(seed, rep) for rep in range(lo, hi)]

    z = np.full(m, a)
    max_z = np.full(m, a)
    qv = np.zeros(m)
    moves = np.zeros(m, dtype=np.int64)
    z_obs = np.full(m, a)
    coupled = np.zeros(m, dtype=bool)
    exited = np.zeros(m, dtype=bool)
    tau_delta = np.full(m, np.inf)
    tau_bar = np.full(m, np.inf)
    z_bar = np.full(m, np.nan)
    violations = dict.fromkeys(INVARIANTS, 0)
    live = np.ones(m, dtype=bool)
    obs_limit = np.inf if observe_at is None else observe_at

    for start, length in block_edges(horizon, sampler.block):
        rows_idx = np.flatnonzero(live)
        if rows_idx.size == 0:
            break
        drawn = sampler.draw_many([streams[i][0] for i in rows_idx], start, length, horizon)
        rows = [(t, x, streams[i][1].random(len(t))) for i, (t, x) in zip(rows_idx, drawn)]
        width = max((len(r[0]) for r in rows), default=0)
        if width == 0:
            continue
        T, X, C = _pad(rows, width)
        idx = rows_idx
        zl = z[idx]
        on = np.ones(idx.size, dtype=bool)
        for j in range(width):
            x = X[:, j]
            move = on & (np.abs(x) <= 0.5 * zl) & (C[:, j] < 0.5)
            w = np.flatnonzero(move)
            if w.size == 0:
                continue
            z_prev = zl[w]
            dz = -2.0 * x[w]
            z_new = z_prev + dz
            violations["nonnegative"] += int(np.count_nonzero(z_new < 0.0))
            violations["jump_bound"] += int(np.count_nonzero(np.abs(dz) > z_prev))
            g = idx[w]
            down = dz < 0.0
            qv[g[down]] += dz[down] * dz[down]
            moves[g] += 1
            zl[w] = z_new
            max_z[g] = np.maximum(max_z[g], z_new)
            t = T[w, j]
            before_exit = ~exited[g]
            obs = before_exit & (t <= obs_limit)
            z_obs[g[obs]] = z_new[obs]
            leave = before_exit & ((z_new <= delta) | (z_new >= 1.0))
            if leave.any():
                gl = g[leave]
                exited[gl] = True
                tau_bar[gl] = t[leave]
                z_bar[gl] = z_new[leave]
                violations["exit_below_two"] += int(np.count_nonzero(z_new[leave] >= 2.0))
                if stop_at_exit:
                    on[w[leave]] = False
            # a pair that left through the top can still couple later
            hit = z_new <= delta
            if hit.any():
                coupled[g[hit]] = True
                tau_delta[g[hit]] = t[hit]
                on[w[hit]] = False
            if not on.any():
                break
        z[idx] = zl
        live = ~coupled & ~(exited & stop_at_exit)

    return CouplingBatch(a, delta, eps, horizon, coupled, tau_delta, tau_bar, z_bar,
                         max_z, qv, z_obs, z.copy(), moves, violations)


def simulate_couplings(
    measure: SymmetricLevyMeasure,
    a: float,
    delta: float,
    eps: float,
    horizon: float,
    n: int,
    seed: int,
    *,
    stop_at_exit: bool = False,
    observe_at: float | None = None,
    workers: int = 1,
    chunk: int = CHUNK,
) -> CouplingBatch:
    """Run replications 0..n-1 of ``seed`` on [0, horizon].

    Replication i uses ``replication_streams(seed, i)``, so the outcome of
    each replication does not depend on ``workers`` or ``chunk``. With
    ``stop_at_exit`` a replication stops at τ̄; ``observe_at`` records
    Z at min(observe_at, τ̄).
    """
    check_coupling_args(a, delta, eps)
    if n < 1:
        raise DomainError("replication count must be positive")
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    tasks = [(measure, a, delta, eps, horizon, seed, lo, hi, stop_at_exit, observe_at)
             for lo, hi in chunk_ranges(n, chunk)]
    return CouplingBatch.concat(map_chunks(_run_chunk, tasks, workers))


def estimate_uncoupled_probability(measure, a, delta, eps, T=1.0, n=10_000, seed=0,
                                   workers=1) -> MCEstimate:
    """P(τ_δ > T) with its binomial standard error."""
    batch = simulate_couplings(measure, a, delta, eps, T, n, seed, workers=workers)
    batch.raise_on_violation()
    return uncoupled_from(batch)


def uncoupled_from(batch: CouplingBatch) -> MCEstimate:
    return proportion(int(np.count_nonzero(~batch.coupled)), len(batch))


@dataclass(frozen=True)
class ExitTimeEstimate:
    estimate: MCEstimate
    censor_fraction: float


def exit_time_from(batch: CouplingBatch, T_max: float) -> ExitTimeEstimate:
    capped = np.minimum(batch.tau_bar, T_max)
    return ExitTimeEstimate(aggregate(capped), float(np.mean(~batch.exited)))


def estimate_exit_time(measure, a, delta, eps, T_max=64.0, n=10_000, seed=0,
                       workers=1) -> ExitTimeEstimate:
    """Mean of min(τ̄, T_max); the censored fraction is always reported."""
    batch = simulate_couplings(measure, a, delta, eps, T_max, n, seed,
                               stop_at_exit=True, workers=workers)
    batch.raise_on_violation()
    return exit_time_from(batch, T_max)


def martingale_check(measure, a, delta, eps, t=1.0, n=10_000, seed=0, workers=1) -> MCEstimate:
    """Monte Carlo mean of Z_{t∧τ̄}; should equal a."""
    batch = simulate_couplings(measure, a, delta, eps, t, n, seed, observe_at=t,
                               workers=workers)
    batch.raise_on_violation()
    return aggregate(batch.z_observed)


@dataclass(frozen=True)
class QVProbe:
    z: float
    empirical_rate: MCEstimate
    candidate_a: float
    candidate_b: float
    multi_event_fraction: float

    @property
    def matches(self) -> str:
        in_a = self.empirical_rate.contains(self.candidate_a)
        in_b = self.empirical_rate.contains(self.candidate_b)
        return {(True, True): "both", (True, False): "A", (False, True): "B"}.get(
            (in_a, in_b), "neither")


def qv_rate_probe(measure, z, eps=None, horizon=0.01, n=100_000, seed=0, delta=None,
                  workers=1) -> QVProbe:
    """Rate of Σ(ΔZ)²·1{ΔZ<0} started from Z = z, against two candidate compensators.

    candidate_a = 2·η(z/2) follows from the mirrored-jump rule;
    candidate_b = η(z)/2 is the rate used in the exit-time argument.
    """
    if not 0.0 < z < 1.0:
        raise DomainError("z must lie in (0,1)")
    eps = z * 1e-3 if eps is None else eps
    if eps > z / 8.0:
        raise ConfigError(f"eps={eps:g} must not exceed z/8={z / 8:g}")
    delta = 2.0 * eps if delta is None else delta
    cand_a = 2.0 * float(eta(measure, z / 2.0))
    cand_b = float(eta(measure, z)) / 2.0
    batch = simulate_couplings(measure, z, delta, eps, horizon, n, seed, workers=workers)
    batch.raise_on_violation()
    rate = aggregate(batch.qv_neg / horizon)
    multi = float(np.mean(batch.n_moves > 1))
    return QVProbe(z, rate, cand_a, cand_b, multi)


@dataclass(frozen=True)
class SweepRow:
    a: float
    delta: float
    eps: float
    p_uncoupled: MCEstimate
    exit_time: ExitTimeEstimate
    upper_exit_fraction: float
    martingale: MCEstimate
    violations: int


def sweep_point(measure, a, delta, eps, T=1.0, T_max=64.0, n=10_000, seed=0,
                workers=1) -> SweepRow:
    """One grid point: uncoupled probability, E[min(τ̄,T_max)] and side statistics.

    Both runs use the same seed, so the exit-time paths extend the paths
    used for the uncoupled probability.
    """
    horizon_batch = simulate_couplings(measure, a, delta, eps, T, n, seed,
                                       observe_at=T, workers=workers)
    exit_batch = simulate_couplings(measure, a, delta, eps, T_max, n, seed,
                                    stop_at_exit=True, workers=workers)
    return SweepRow(
        a, delta, eps,
        uncoupled_from(horizon_batch),
        exit_time_from(exit_batch, T_max),
        float(np.mean(horizon_batch.max_z >= 1.0)),
        aggregate(horizon_batch.z_observed),
        horizon_batch.total_violations() + exit_batch.total_violations(),
    )
