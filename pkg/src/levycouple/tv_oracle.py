"""Ground truth from the characteristic function.

For characteristics (0, 0, ν) with symmetric ν,

    φ(u) = exp(ψ(u)),   ψ(u) = 2 ∫_0^∞ (cos(ux) − 1) n(x) dx ≤ 0.

ψ is computed by adaptive quadrature split at x = 1/|u|: below the split
the integrand is written as −2 sin²(ux/2) n(x) to avoid cancellation,
above it the oscillatory part uses QUADPACK's Fourier weights.

Density inversion works on a periodic grid x_k = −X + k·dx by FFT. To
avoid ~10⁶ quadratures, log(−ψ) is fitted by a cubic spline in log u on
a geometric set of quadrature nodes and φ is read off the spline.

Total variation is the mass of the signed measure, ‖μ_a − μ‖ = ∫|f(x−a) − f(x)| dx,
so the coupling inequality reads ‖μ_a − μ‖ ≤ 2·P(X̄₁ ≠ Ȳ₁).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from levycouple.errors import DomainError, OracleUnavailable
from levycouple.levy_measure import (
    Stable,
    SymmetricLevyMeasure,
    TruncatedStable,
    tail_mass,
)
from levycouple.stats import MCEstimate

SUPPORTED = (Stable, TruncatedStable)
PHI_FLOOR = 1e-12
DEFAULT_HALF_WIDTH = 2000.0
DEFAULT_GRID = 2 ** 17


def _require_oracle(measure):
    if not isinstance(measure, SUPPORTED):
        raise OracleUnavailable(
            f"the Fourier oracle supports only stable and truncated-stable measures, "
            f"not {measure.family}")


def levy_exponent(measure: SymmetricLevyMeasure, u: float) -> float:
    """ψ(u) = log φ(u)."""
    _require_oracle(measure)
    u = abs(float(u))
    if u == 0.0:
        return 0.0
    split = 1.0 / u
    hi = measure.support_bound
    inner_hi = min(split, hi)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            # scaled to s = x/inner_hi so the tolerance is relative
            near, _ = integrate.quad(
                lambda s: 2.0 * math.sin(0.5 * u * s * inner_hi) ** 2
                * float(measure.density(s * inner_hi)) * inner_hi,
                0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=400)
            far = 0.0
            if hi > split:
                if math.isinf(hi):
                    osc, _ = integrate.quad(lambda x: float(measure.density(x)), split, math.inf,
                                            weight="cos", wvar=u, limlst=200)
                else:
                    osc, _ = integrate.quad(lambda x: float(measure.density(x)), split, hi,
                                            weight="cos", wvar=u, limit=400)
                far = osc - float(tail_mass(measure, split))
        except integrate.IntegrationWarning as exc:
            raise OracleUnavailable(f"exponent quadrature failed at u={u:g}: {exc}") from exc
    return 2.0 * (far - near)


def char_fn(measure: SymmetricLevyMeasure, u: float) -> float:
    return math.exp(levy_exponent(measure, u))


class _PhiSpline:
    """φ on [0, ∞) from a spline of log(−ψ) against log u."""

    def __init__(self, measure, u_lo, u_hi, per_decade=40, cutoff=60.0):
        nodes, values = [], []
        log_u = math.log(u_lo)
        step = math.log(10.0) / per_decade
        while True:
            u = math.exp(log_u)
            psi = levy_exponent(measure, u)
            nodes.append(log_u)
            values.append(math.log(-psi))
            if -psi > cutoff or u >= u_hi:
                break
            log_u += step
        if len(nodes) < 4:
            raise OracleUnavailable("φ decays too fast for the requested grid; widen it")
        self.log_lo, self.log_hi = nodes[0], nodes[-1]
        self.spline = CubicSpline(nodes, values)

    def __call__(self, u):
        u = np.abs(np.asarray(u, dtype=float))
        out = np.zeros_like(u)
        out[u == 0] = 1.0
        inside = (u > 0) & (np.log(np.where(u > 0, u, 1.0)) <= self.log_hi)
        lu = np.log(u[inside])
        if np.any(lu < self.log_lo - 1e-12):
            raise DomainError("spline queried below its smallest node")
        out[inside] = np.exp(-np.exp(self.spline(np.maximum(lu, self.log_lo))))
        return out


@dataclass(frozen=True, eq=False)
class DensityGrid:
    x_grid: np.ndarray
    f_values: np.ndarray
    mass: float
    _u: np.ndarray = field(repr=False)
    _phi: np.ndarray = field(repr=False)

    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])

    @property
    def half_width(self) -> float:
        return -float(self.x_grid[0])

    def _invert(self, spectrum):
        du = math.pi / self.half_width
        sign = np.where(np.arange(len(spectrum)) % 2 == 0, 1.0, -1.0)
        return np.real(np.fft.fft(spectrum * sign)) * du / (2.0 * math.pi)

    def shifted(self, a: float) -> np.ndarray:
        """Values of x ↦ f(x − a) on the grid (exact spectral shift, periodic)."""
        return self._invert(self._phi * np.exp(1j * self._u * a))

    def value(self, x):
        return np.interp(x, self.x_grid, self.f_values)

    def cdf(self, x):
        """F(x) = ½ + ∫_0^x f, by cumulative trapezoid on the grid."""
        f = self.f_values
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * self.dx)])
        zero = np.interp(0.0, self.x_grid, cum)
        return np.clip(0.5 + np.interp(x, self.x_grid, cum) - zero, 0.0, 1.0)

    def tv_shift(self, a: float) -> tuple[float, float]:
        """(∫|f(x−a) − f(x)| dx, error bound) for a ≥ 0.

        The bound covers the mass outside the grid and its periodic images
        (for a unimodal symmetric f each tail contributes at most a·f(X − a))
        plus the trapezoid error |slope|·dx²/4 at each sign change of the
        difference.
        """
        if a < 0:
            raise DomainError("shift must be nonnegative")
        if a == 0:
            return 0.0, 0.0
        signed = self.shifted(a) - self.f_values
        tv = float(math.fsum(np.abs(signed)) * self.dx)
        edge = float(self.value(self.half_width - a)) if a < self.half_width else 1.0
        cross = np.flatnonzero(np.sign(signed[1:]) != np.sign(signed[:-1]))
        kink = float(np.sum(np.abs(signed[cross + 1] - signed[cross]))) * self.dx / 4.0
        return min(tv, 2.0), 4.0 * a * max(edge, 0.0) + kink


@lru_cache(maxsize=16)
def invert_density(measure: SymmetricLevyMeasure,
                   x_range: tuple[float, float] = (-DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH),
                   grid_size: int = DEFAULT_GRID) -> DensityGrid:
    """Density of X₁ on a uniform grid over the symmetric range ``x_range``."""
    _require_oracle(measure)
    lo, hi = map(float, x_range)
    if not (hi > 0 and math.isclose(lo, -hi)):
        raise DomainError("x_range must be symmetric about 0")
    if grid_size < 16 or grid_size % 2:
        raise DomainError("grid_size must be an even integer ≥ 16")
    dx = 2.0 * hi / grid_size
    du = math.pi / hi
    u_max = math.pi / dx
    if char_fn(measure, u_max) >= PHI_FLOOR:
        raise OracleUnavailable(
            f"φ(u_max={u_max:g}) ≥ {PHI_FLOOR:g}; refine the grid (dx={dx:g})")
    tail_check = char_fn(measure, 0.5 * u_max) * (0.5 * u_max) ** 1.01
    if tail_check > 1e-6:
        raise OracleUnavailable("φ does not decay fast enough to be integrable on this grid")
    phi_fn = _PhiSpline(measure, du, u_max)
    u = np.fft.fftfreq(grid_size, d=dx) * 2.0 * math.pi
    phi = phi_fn(u).astype(complex)
    x = -hi + dx * np.arange(grid_size)
    sign = np.where(np.arange(grid_size) % 2 == 0, 1.0, -1.0)
    f = np.real(np.fft.fft(phi * sign)) * du / (2.0 * math.pi)
    mass = float(math.fsum(0.5 * (f[1:] + f[:-1])) * dx)
    return DensityGrid(x, f, mass, u, phi)


def tv_distance(measure, a, x_range=(-DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH),
                grid_size=DEFAULT_GRID) -> float:
    """‖μ_a − μ‖ as the L¹ distance of densities (total mass convention)."""
    if a == 0:
        return 0.0
    return invert_density(measure, tuple(x_range), grid_size).tv_shift(abs(a))[0]


@dataclass(frozen=True)
class BoundCheck:
    a: float
    tv: float
    tv_error: float
    p_uncoupled: MCEstimate
    allowance: float
    slack: float

    @property
    def half_mass_slack(self) -> float:
        """Same inequality under ‖·‖ = ½∫|f_a − f|, i.e. TV ≤ P(≠)."""
        return 0.5 * self.slack


def coupling_bound_check(measure, a, delta, eps, n=100_000, seed=0, T=1.0,
                         x_range=(-DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH),
                         grid_size=DEFAULT_GRID, workers=1) -> BoundCheck:
    """Compare the oracle TV with 2·P(τ_δ > 1).

    slack = 2·(p̂ + 3·se) + TV(δ-shift) − TV(a-shift); the δ-shift term
    stands in for the distance left unresolved when the pair is only
    δ-close.
    """
    from levycouple.coupling import estimate_uncoupled_probability

    if a == 0:
        zero = MCEstimate(0.0, 0.0, n, (0.0, 0.0))
        return BoundCheck(0.0, 0.0, 0.0, zero, 0.0, 0.0)
    grid = invert_density(measure, tuple(x_range), grid_size)
    tv, err = grid.tv_shift(a)
    allowance, _ = grid.tv_shift(delta)
    p = estimate_uncoupled_probability(measure, a, delta, eps, T, n, seed, workers)
    slack = 2.0 * (p.mean + 3.0 * p.stderr) + allowance - tv
    return BoundCheck(a, tv, err, p, allowance, slack)
