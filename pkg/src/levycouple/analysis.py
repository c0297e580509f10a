"""The integral condition ∫₀¹ r/η(r) dr < ∞, the Sato comparator and the
convex potential g.

All integrals over (0, 1] are carried out in the depth variable
t = log(1/r), using ``measure.log_eta_depth`` so that radii far below the
double-precision range are reachable. With r = e^{-t}:

    ∫_x^1 r/η(r) dr = ∫_0^{log 1/x} r²/η dt,   ∫_x^1 dr/η(r) = ∫_0^{log 1/x} r/η dt.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from levycouple.errors import DomainError, MeasureError
from levycouple.levy_measure import SymmetricLevyMeasure, eta

LN10 = math.log(10.0)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_GL5_NODES, _GL5_WEIGHTS = np.polynomial.legendre.leggauss(5)
_G16_NODES, _G16_WEIGHTS = np.polynomial.legendre.leggauss(16)


class Status(str, enum.Enum):
    FINITE = "finite"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ConditionVerdict:
    status: Status
    value: float | None
    error: float | None
    local_exponent_at_0: float
    diagnostics: str = ""


@dataclass(frozen=True)
class SatoVerdict:
    alpha: float
    holds: bool
    liminf_estimate: float
    trend: float


def _log_h(measure, t, power):
    """log of r^power/η(r) at depth t, rejecting measures with η = 0."""
    le = measure.log_eta_depth(t)
    if np.any(~np.isfinite(le)):
        raise MeasureError(f"{measure.label}: η vanishes or is not finite at some r in (0,1]")
    return -power * np.asarray(t) - le


def _panel_integrals(measure, edges, power, nodes=_GL_NODES, weights=_GL_WEIGHTS):
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    t = (a + b)[:, None] * 0.5 + half[:, None] * nodes[None, :]
    return half * (np.exp(_log_h(measure, t, power)) @ weights)


def _depth_edges(measure, t_end, n_panels):
    """Uniform panels in depth plus the depths of the density's kinks inside (0, 1)."""
    edges = np.linspace(0.0, t_end, n_panels + 1)
    kinks = [-math.log(b) for b in measure.breakpoints() if 0.0 < b < 1.0]
    kinks = [k for k in kinks if k < t_end]
    if kinks:
        edges = np.union1d(edges, kinks)
    return edges


def _fit_slope(x, y):
    return float(np.polyfit(x, y, 1)[0])


def condition_integral(
    measure: SymmetricLevyMeasure,
    decades: int = 30,
    panels_per_decade: int = 64,
    margin: float = 0.05,
) -> ConditionVerdict:
    """Decide finiteness of ∫₀¹ r/η(r) dr and estimate it when finite."""
    t_end = decades * LN10
    edges = _depth_edges(measure, t_end, decades * panels_per_decade)
    panels = _panel_integrals(measure, edges, 2)
    coarse = _panel_integrals(measure, edges, 2, _GL5_NODES, _GL5_WEIGHTS)
    partial = math.fsum(panels)
    rule_err = float(np.sum(np.abs(panels - coarse)))
    decade_start = np.searchsorted(edges, np.arange(decades) * LN10, side="left")
    decade_sums = np.add.reduceat(panels, decade_start)

    # local power p in r/η(r) ~ r^{-p}, fitted on the deepest two decades
    t_fit = np.linspace(t_end - 2 * LN10, t_end, 41)
    log_ratio = -t_fit - measure.log_eta_depth(t_fit)
    p = -_fit_slope(-t_fit, log_ratio)

    diag = [f"partial={partial:.17g} over r in [1e-{decades},1]", f"p={p:.6f}"]

    def finite(extra=""):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                tail, tail_err = integrate.quad(
                    lambda t: math.exp(float(_log_h(measure, t, 2))), t_end, math.inf,
                    epsabs=1e-15, epsrel=1e-11, limit=400)
            except integrate.IntegrationWarning as exc:
                return ConditionVerdict(
                    Status.INCONCLUSIVE, None, None, p,
                    "; ".join(diag + [extra, f"tail quadrature failed: {exc}"]))
        diag.append(f"tail={tail:.3e}")
        return ConditionVerdict(Status.FINITE, partial + tail, rule_err + tail_err, p,
                                "; ".join(d for d in diag + [extra] if d))

    if p < 1.0 - margin:
        return finite()
    if p > 1.0 + margin:
        return ConditionVerdict(Status.DIVERGENT, None, None, p, "; ".join(diag))

    # borderline exponent: decide by the decay of decade sums, S ~ depth^{-q}
    k = np.arange(decades - 10, decades)
    depth_mid = (k + 0.5) * LN10
    if np.any(decade_sums[k] <= 0):
        return ConditionVerdict(Status.INCONCLUSIVE, None, None, p, "; ".join(diag))
    q = -_fit_slope(np.log(depth_mid), np.log(decade_sums[k]))
    diag.append(f"decade-sum decay q={q:.4f}")
    if q > 1.0 + margin:
        return finite(f"summable decade sums (q={q:.3f})")
    if q < 1.0 - margin:
        return ConditionVerdict(Status.DIVERGENT, None, None, p, "; ".join(diag))
    return ConditionVerdict(Status.INCONCLUSIVE, None, None, p, "; ".join(diag))


def sato_condition(
    measure: SymmetricLevyMeasure,
    alpha: float,
    levels: int = 64,
    floor: float = 1e-8,
) -> SatoVerdict:
    """lim inf_{r→0} η(r)/r^{2-α} > 0, judged on r = 2^{-k}, k = 1..levels."""
    if not 0.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (0,2), got {alpha}")
    t = np.arange(1, levels + 1) * math.log(2.0)
    log_ratio = measure.log_eta_depth(t) + (2.0 - alpha) * t
    fine = t >= t[-1] - 2 * LN10
    liminf = float(np.exp(np.min(log_ratio[fine])))
    trend = _fit_slope(t[fine], log_ratio[fine])
    holds = liminf > floor and trend >= -1e-9
    return SatoVerdict(alpha, bool(holds), liminf, trend)


@dataclass(frozen=True, eq=False)
class GTable:
    """g(x) = ∫_x^1 ∫_y^1 dr/η(r) dy = ∫_x^1 (r − x)/η(r) dr on a geometric grid.

    ``first_moment`` holds ∫_x^1 r/η(r) dr, so g = first_moment + x·g′.
    Off-grid values are obtained by Gauss–Legendre quadrature from the
    nearest node above, not by interpolation.
    """

    measure: SymmetricLevyMeasure
    grid: np.ndarray
    g_values: np.ndarray
    gprime_values: np.ndarray
    first_moment: np.ndarray
    g_zero: float
    _depth: np.ndarray = field(repr=False)

    @property
    def x_min(self) -> float:
        return float(self.grid[0])

    def _anchored(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x <= 0) or np.any(x > 1.0):
            raise DomainError("g is tabulated on (0, 1]")
        t_x = -np.log(x)
        k = np.searchsorted(self.grid, x, side="left")
        k = np.minimum(k, len(self.grid) - 1)
        first = self.first_moment[k].copy()
        inv = -self.gprime_values[k].copy()
        below = x < self.grid[0]
        inner = ~below
        if np.any(inner):
            t_k = self._depth[k[inner]]
            edges_a, edges_b = t_k, t_x[inner]
            half = 0.5 * (edges_b - edges_a)
            t = (edges_a + edges_b)[:, None] * 0.5 + half[:, None] * _G16_NODES
            first[inner] += half * (np.exp(_log_h(self.measure, t, 2)) @ _G16_WEIGHTS)
            inv[inner] += half * (np.exp(_log_h(self.measure, t, 1)) @ _G16_WEIGHTS)
        for i in np.flatnonzero(below):
            edges = np.linspace(self._depth[0], t_x[i],
                                max(2, int(math.ceil((t_x[i] - self._depth[0]) / 0.05)) + 1))
            first[i] += math.fsum(_panel_integrals(self.measure, edges, 2, _G16_NODES, _G16_WEIGHTS))
            inv[i] += math.fsum(_panel_integrals(self.measure, edges, 1, _G16_NODES, _G16_WEIGHTS))
        return x, first, -inv

    def gprime(self, x):
        _, _, gp = self._anchored(x)
        return gp if np.ndim(x) else float(gp[0])

    def g(self, x):
        xa, first, gp = self._anchored(x)
        val = first + xa * gp
        return val if np.ndim(x) else float(val[0])

    def g2(self, x):
        """g″ = 1/η."""
        return 1.0 / eta(self.measure, x)


def build_g(measure: SymmetricLevyMeasure, grid_size: int = 200, x_min: float = 1e-6) -> GTable:
    if grid_size < 2:
        raise DomainError("grid_size must be at least 2")
    verdict = condition_integral(measure)
    if verdict.status is not Status.FINITE:
        raise MeasureError(
            f"{measure.label}: ∫₀¹ r/η dr is {verdict.status.value}; g(0) would be infinite")
    depth = np.linspace(-math.log(x_min), 0.0, grid_size)
    kinks = [-math.log(b) for b in measure.breakpoints() if x_min < b < 1.0]
    if kinks:
        depth = np.union1d(depth, kinks)[::-1]
    grid = np.exp(-depth)
    grid[0], grid[-1] = x_min, 1.0
    # integrate each interval between consecutive nodes, accumulate from x = 1 down
    edges = depth[::-1]
    first_pieces = _panel_integrals(measure, edges, 2, _G16_NODES, _G16_WEIGHTS)
    inv_pieces = _panel_integrals(measure, edges, 1, _G16_NODES, _G16_WEIGHTS)
    first = np.concatenate([[0.0], np.cumsum(first_pieces)])[::-1]
    gprime = -np.concatenate([[0.0], np.cumsum(inv_pieces)])[::-1]
    g_values = first + grid * gprime
    return GTable(measure, grid, g_values, gprime, first, float(verdict.value), depth)


def convexity_gap(gtable: GTable, x: float, y: float, measure: SymmetricLevyMeasure | None = None) -> float:
    """Slack in g(y) − g(x) ≥ g′(x)(y−x) + ½(y−x)²/η(x)·1{y<x}."""
    measure = measure or gtable.measure
    for v in (x, y):
        if not gtable.x_min <= v <= 1.0:
            raise DomainError(f"{v} lies outside the tabulated range [{gtable.x_min:g}, 1]")
    d = y - x
    gap = gtable.g(y) - gtable.g(x) - gtable.gprime(x) * d
    if y < x:
        gap -= 0.5 * d * d / float(eta(measure, x))
    return gap
