"""Symmetric Lévy measures as computable objects.

Every measure is described by its one-sided density ``n`` on (0, ∞), so
that ν(dx) = n(|x|) dx on ℝ∖{0}. From it we expose

* the one-sided tail  N(r) = ν((r, ∞)),
* the one-sided truncated second moment  η(r) = ∫_{0<x≤r} x² ν(dx),
* ``log_eta_depth(t) = log η(e^{-t})``, which lets callers reach radii far
  below the smallest positive double,
* the inverse tail used for inverse-transform sampling of jump sizes.

η is one-sided throughout. The two-sided quantity ∫_{|x|≤r} x² ν(dx) is
exactly 2η(r) for a symmetric ν; the classification of ∫₀¹ r/η(r) dr is
the same under either normalisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np
from scipy import integrate

from levycouple.errors import DomainError, MeasureError, NoMassError

_LOG_EPS = 1e-12


class SymmetricLevyMeasure:
    """Base class; subclasses are frozen dataclasses and therefore hashable."""

    family: str = ""

    @property
    def support_bound(self) -> float:
        return math.inf

    # -- per-family primitives (vectorised, no argument checking) -------
    def density(self, x):
        raise NotImplementedError

    def _tail(self, r):
        raise NotImplementedError

    def _eta(self, r):
        raise NotImplementedError

    def _inverse_tail(self, y):
        raise NotImplementedError

    def log_eta_depth(self, t):
        """log η(e^{-t}) for t ≥ 0."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(self._eta(np.exp(-t)))

    def breakpoints(self) -> tuple[float, ...]:
        """Points where the density is not smooth (used by quadrature)."""
        return ()

    # -- public API ------------------------------------------------------
    def tail(self, r):
        return tail_mass(self, r)

    def eta(self, r):
        return eta(self, r)

    def inverse_tail(self, y):
        """Smallest r with N(r) ≤ y, for 0 < y ≤ N(0⁺)."""
        return self._inverse_tail(np.asarray(y, dtype=float))

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    @property
    def label(self) -> str:
        params = ",".join(
            f"{k}={v:g}" for k, v in self.to_dict().items()
            if k != "family" and isinstance(v, (int, float))
        )
        return f"{self.family}({params})"


@dataclass(frozen=True)
class Stable(SymmetricLevyMeasure):
    """ν(dx) = c |x|^{-1-α} dx, the symmetric α-stable Lévy measure."""

    alpha: float
    c: float = 1.0
    family = "stable"

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise MeasureError(f"stable alpha must lie in (0,2), got {self.alpha}")
        if not self.c > 0.0:
            raise MeasureError(f"stable scale c must be positive, got {self.c}")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return self.c * x ** (-1.0 - self.alpha)

    def _tail(self, r):
        return self.c * r ** (-self.alpha) / self.alpha

    def _eta(self, r):
        a = self.alpha
        return self.c * r ** (2.0 - a) / (2.0 - a)

    def log_eta_depth(self, t):
        a = self.alpha
        return math.log(self.c / (2.0 - a)) - (2.0 - a) * np.asarray(t, dtype=float)

    def _inverse_tail(self, y):
        return (self.c / (self.alpha * y)) ** (1.0 / self.alpha)

    def to_dict(self):
        return {"family": self.family, "alpha": self.alpha, "c": self.c}


@dataclass(frozen=True)
class TruncatedStable(SymmetricLevyMeasure):
    """Stable density cut off above ``cutoff``."""

    alpha: float
    c: float = 1.0
    cutoff: float = 1.0
    family = "truncated_stable"

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise MeasureError(f"alpha must lie in (0,2), got {self.alpha}")
        if not (self.c > 0.0 and self.cutoff > 0.0):
            raise MeasureError("c and cutoff must be positive")

    @property
    def support_bound(self):
        return self.cutoff

    def breakpoints(self):
        return (self.cutoff,)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= self.cutoff, self.c * x ** (-1.0 - self.alpha), 0.0)

    def _tail(self, r):
        a = self.alpha
        rr = np.minimum(r, self.cutoff)
        return self.c * (rr ** (-a) - self.cutoff ** (-a)) / a

    def _eta(self, r):
        a = self.alpha
        return self.c * np.minimum(r, self.cutoff) ** (2.0 - a) / (2.0 - a)

    def log_eta_depth(self, t):
        a = self.alpha
        t = np.maximum(np.asarray(t, dtype=float), -math.log(self.cutoff))
        return math.log(self.c / (2.0 - a)) - (2.0 - a) * t

    def _inverse_tail(self, y):
        a = self.alpha
        return (a * y / self.c + self.cutoff ** (-a)) ** (-1.0 / a)

    def to_dict(self):
        return {"family": self.family, "alpha": self.alpha, "c": self.c,
                "cutoff": self.cutoff}


@dataclass(frozen=True)
class PowerLog(SymmetricLevyMeasure):
    """Measure with η(r) = r²(1 + log(1/r))^{1+ε} on (0, 1], no mass above 1.

    The one-sided density is n(x) = η'(x)/x² = L^ε (2L − 1 − ε)/x with
    L = 1 + log(1/x); it is nonnegative on (0, 1] only for ε ≤ 1.
    """

    eps: float
    family = "powerlog"

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise MeasureError(f"powerlog eps must lie in (0,1], got {self.eps}")

    @property
    def support_bound(self):
        return 1.0

    def breakpoints(self):
        return (1.0,)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = x <= 1.0
        xs = np.where(inside, x, 1.0)
        L = 1.0 - np.log(xs)
        return np.where(inside, L ** self.eps * (2.0 * L - 1.0 - self.eps) / xs, 0.0)

    def _tail_of_L(self, L):
        e = self.eps
        return (2.0 * L ** (2.0 + e) / (2.0 + e) - L ** (1.0 + e)
                - 2.0 / (2.0 + e) + 1.0)

    def _tail(self, r):
        L = 1.0 - np.log(np.minimum(r, 1.0))
        return self._tail_of_L(L)

    def _eta(self, r):
        rr = np.minimum(r, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = rr * rr * (1.0 - np.log(rr)) ** (1.0 + self.eps)
        return np.where(rr > 0.0, val, 0.0)

    def log_eta_depth(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return -2.0 * t + (1.0 + self.eps) * np.log1p(t)

    def _inverse_tail(self, y):
        # bisection on L = 1 + log(1/r); N is increasing in L for eps ≤ 1
        y = np.asarray(y, dtype=float)
        lo = np.ones_like(y)
        hi = np.full_like(y, 2.0)
        while True:
            short = self._tail_of_L(hi) < y
            if not short.any():
                break
            hi = np.where(short, 2.0 * hi, hi)
        # converged entries are frozen so each result is independent of the batch
        active = hi - lo > _LOG_EPS
        while active.any():
            mid = 0.5 * (lo + hi)
            above = self._tail_of_L(mid) >= y
            hi = np.where(active & above, mid, hi)
            lo = np.where(active & ~above, mid, lo)
            active = hi - lo > _LOG_EPS
        return np.exp(1.0 - 0.5 * (lo + hi))

    def to_dict(self):
        return {"family": self.family, "eps": self.eps}


@dataclass(frozen=True)
class Quadratic(SymmetricLevyMeasure):
    """η(r) = c·r² on (0, 1]: density 2c/x below 1, the borderline case."""

    c: float = 1.0
    family = "quadratic"

    def __post_init__(self):
        if not self.c > 0.0:
            raise MeasureError("c must be positive")

    @property
    def support_bound(self):
        return 1.0

    def breakpoints(self):
        return (1.0,)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 1.0, 2.0 * self.c / x, 0.0)

    def _tail(self, r):
        return -2.0 * self.c * np.log(np.minimum(r, 1.0))

    def _eta(self, r):
        rr = np.minimum(r, 1.0)
        return self.c * rr * rr

    def log_eta_depth(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return math.log(self.c) - 2.0 * t

    def _inverse_tail(self, y):
        return np.exp(-np.asarray(y) / (2.0 * self.c))

    def to_dict(self):
        return {"family": self.family, "c": self.c}


@dataclass(frozen=True)
class Tabulated(SymmetricLevyMeasure):
    """Measure given by its tail on a grid of radii.

    N is interpolated linearly in (log r, log N) between positive nodes.
    The last node must carry N = 0 and marks the support bound; the final
    segment is linear in r. Tail queries below the first node are refused;
    η below the first node continues the first segment's power law, which
    must have exponent in (0, 2).
    """

    r: tuple[float, ...]
    n: tuple[float, ...]
    family = "tabulated"

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        n = np.asarray(self.n, dtype=float)
        if r.ndim != 1 or r.size < 3 or r.shape != n.shape:
            raise MeasureError("tabulated measure needs matching r and N grids of length ≥ 3")
        if np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise MeasureError("tabulated radii must be positive and strictly increasing")
        if n[-1] != 0.0 or np.any(n[:-1] <= 0):
            raise MeasureError("tabulated tail must be positive except a final zero")
        if np.any(np.diff(n) > 0):
            raise MeasureError("tabulated tail must be nonincreasing")
        p0 = self._powers[0]
        if not 0.0 < p0 < 2.0:
            raise MeasureError(f"first segment exponent {p0:g} must lie in (0,2)")

    @cached_property
    def _r(self):
        return np.asarray(self.r, dtype=float)

    @cached_property
    def _n(self):
        return np.asarray(self.n, dtype=float)

    @cached_property
    def _powers(self):
        r, n = np.asarray(self.r, float), np.asarray(self.n, float)
        return -np.diff(np.log(n[:-1])) / np.diff(np.log(r[:-1]))

    @cached_property
    def _cum_moment(self):
        # A_i = ∫_0^{r_i} 2x N(x) dx at every node
        r, n, p = self._r, self._n, self._powers
        out = np.empty_like(r)
        out[0] = 2.0 * n[0] * r[0] ** 2 / (2.0 - p[0])
        for i in range(len(r) - 1):
            out[i + 1] = out[i] + self._segment_moment(i, r[i + 1])
        return out

    def _segment_moment(self, i, x):
        r, n = self._r, self._n
        if i == len(r) - 2:
            slope = (n[i + 1] - n[i]) / (r[i + 1] - r[i])
            b = n[i] - slope * r[i]
            return (b * (x * x - r[i] ** 2) + 2.0 * slope * (x ** 3 - r[i] ** 3) / 3.0)
        p = self._powers[i]
        k = n[i] * r[i] ** p
        if abs(p - 2.0) < 1e-12:
            return 2.0 * k * np.log(x / r[i])
        return 2.0 * k * (x ** (2.0 - p) - r[i] ** (2.0 - p)) / (2.0 - p)

    @property
    def support_bound(self):
        return float(self.r[-1])

    def breakpoints(self):
        return tuple(self.r)

    def _segment(self, x):
        return np.clip(np.searchsorted(self._r, x, side="right") - 1, 0, len(self._r) - 2)

    def _tail_scalar(self, x):
        r, n = self._r, self._n
        if x >= r[-1]:
            return 0.0
        if x < r[0]:
            raise DomainError(f"tail below the tabulated grid (r={x:g} < {r[0]:g})")
        i = int(self._segment(x))
        if i == len(r) - 2:
            return n[i] + (n[i + 1] - n[i]) * (x - r[i]) / (r[i + 1] - r[i])
        return n[i] * (x / r[i]) ** (-self._powers[i])

    def _tail(self, r):
        return np.vectorize(self._tail_scalar, otypes=[float])(r)

    def density(self, x):
        def one(v):
            r, n = self._r, self._n
            if v >= r[-1]:
                return 0.0
            if v < r[0]:
                p = self._powers[0]
                return p * n[0] * (v / r[0]) ** (-p) / v
            i = int(self._segment(v))
            if i == len(r) - 2:
                return n[i] / (r[i + 1] - r[i])
            return self._powers[i] * self._tail_scalar(v) / v

        return np.vectorize(one, otypes=[float])(x)

    def _eta_scalar(self, x):
        r, n = self._r, self._n
        if x <= 0.0:
            return 0.0
        if x < r[0]:
            p = self._powers[0]
            return n[0] * r[0] ** p * x ** (2.0 - p) * p / (2.0 - p)
        x = min(x, r[-1])
        i = int(self._segment(x))
        moment = self._cum_moment[i] + self._segment_moment(i, x)
        return moment - x * x * self._tail_scalar(x)

    def _eta(self, r):
        return np.vectorize(self._eta_scalar, otypes=[float])(r)

    def log_eta_depth(self, t):
        t = np.asarray(t, dtype=float)
        r0, n0, p = self._r[0], self._n[0], self._powers[0]
        deep = t > -math.log(r0)
        const = math.log(n0 * r0 ** p * p / (2.0 - p))
        out = const - (2.0 - p) * t
        shallow = ~deep
        if np.any(shallow):
            out[shallow] = np.log(self._eta(np.exp(-t[shallow])))
        return out

    def _inverse_tail_scalar(self, y):
        r, n = self._r, self._n
        if y > n[0]:
            raise DomainError("inverse tail below the tabulated grid")
        # segment i with n[i] ≥ y > n[i+1]
        i = int(np.searchsorted(-n, -y, side="right")) - 1
        i = min(max(i, 0), len(r) - 2)
        if i == len(r) - 2:
            return r[i] + (n[i] - y) * (r[i + 1] - r[i]) / (n[i] - n[i + 1])
        return r[i] * (y / n[i]) ** (-1.0 / self._powers[i])

    def _inverse_tail(self, y):
        return np.vectorize(self._inverse_tail_scalar, otypes=[float])(y)

    def to_dict(self):
        return {"family": self.family, "r": list(self.r), "n": list(self.n)}


_FAMILIES = {
    "stable": lambda d: Stable(float(d["alpha"]), float(d.get("c", 1.0))),
    "truncated_stable": lambda d: TruncatedStable(
        float(d["alpha"]), float(d.get("c", 1.0)), float(d.get("cutoff", 1.0))),
    "powerlog": lambda d: PowerLog(float(d["eps"])),
    "quadratic": lambda d: Quadratic(float(d.get("c", 1.0))),
    "tabulated": lambda d: Tabulated(tuple(map(float, d["r"])), tuple(map(float, d["n"]))),
}


def measure_from_dict(spec: dict[str, Any]) -> SymmetricLevyMeasure:
    """Build a measure from a config mapping such as ``{"family": "stable", "alpha": 1}``."""
    family = str(spec.get("family", "")).lower().replace("-", "_")
    try:
        build = _FAMILIES[family]
    except KeyError:
        raise MeasureError(
            f"unknown measure family {spec.get('family')!r}; "
            f"expected one of {sorted(_FAMILIES)}") from None
    try:
        return build(spec)
    except KeyError as exc:
        raise MeasureError(f"measure family {family!r} is missing parameter {exc}") from None


def _scalar_or_array(value, like):
    return float(value) if np.ndim(like) == 0 else value


def eta(measure: SymmetricLevyMeasure, r):
    """One-sided η(r) = ∫_{0<x≤r} x² ν(dx)."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("eta requires r ≥ 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(arr > 0, measure._eta(np.where(arr > 0, arr, 1.0)), 0.0)
    return _scalar_or_array(out, r)


def tail_mass(measure: SymmetricLevyMeasure, r):
    """One-sided tail N(r) = ν((r, ∞)); zero at or beyond the support bound."""
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("tail_mass requires r > 0")
    inside = arr < measure.support_bound
    out = np.where(inside, measure._tail(np.where(inside, arr, arr.min())), 0.0)
    return _scalar_or_array(np.maximum(out, 0.0), r)


def sample_jump(measure: SymmetricLevyMeasure, eps: float, u, s):
    """Signed jump from ν restricted to {|x| > eps}, normalised.

    The magnitude is N⁻¹(u·N(eps)) and the sign is taken from ``s``
    (positive values and ``True`` mean +).
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    u_arr = np.asarray(u, dtype=float)
    if np.any(~((u_arr > 0) & (u_arr < 1))):
        raise DomainError("u must lie in the open unit interval")
    if eps >= measure.support_bound:
        raise NoMassError(f"no Lévy mass above eps={eps:g}")
    top = tail_mass(measure, eps)
    if top <= 0:
        raise NoMassError(f"no Lévy mass above eps={eps:g}")
    mag = np.maximum(measure._inverse_tail(u_arr * top), eps)
    sign = np.where(np.asarray(s) > 0, 1.0, -1.0)
    return _scalar_or_array(sign * mag, u)


def eta_by_quadrature(measure: SymmetricLevyMeasure, r: float) -> float:
    """η(r) by adaptive quadrature of x²·n(x); independent of the closed forms."""
    if r < 0:
        raise DomainError("eta requires r ≥ 0")
    if r == 0:
        return 0.0
    upper = min(r, measure.support_bound)
    pts = [p for p in measure.breakpoints() if 0 < p < upper]

    def f(x):
        return x * x * float(measure.density(x))

    # integrate on [0, upper] in scaled units to keep the tolerance relative
    val, _ = integrate.quad(lambda s: f(s * upper) * upper, 0.0, 1.0,
                            points=[p / upper for p in pts] or None,
                            epsabs=0.0, epsrel=1e-13, limit=500)
    return val
