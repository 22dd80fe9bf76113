"""Quantile-based risk functionals and their relation to expectiles.

Implements Value-at-Risk, Average Value-at-Risk (both the tail-integral
and the threshold form), general spectral risk measures, the smallest
spectral measure dominating a given expectile, the Kusuoka-style
representation of expectiles as a maximum of mean/AVaR mixtures, and a
report object checking the sharp comparison inequalities between
expectiles and AVaR.

All quantile integrals are evaluated exactly for step quantile
functions; quadrature only enters for user-supplied spectra without a
closed-form antiderivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .distributions import EmpiricalDistribution, RiskLevel, level_value
from .expectiles import expectile

__all__ = [
    "value_at_risk",
    "average_value_at_risk",
    "average_value_at_risk_threshold",
    "Spectrum",
    "flat_spectrum",
    "avar_spectrum",
    "enveloping_spectrum",
    "spectral_risk",
    "kusuoka_expectile",
    "ComparisonBoundsReport",
    "check_comparison_bounds",
]

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _tail_level(level, allow_zero=True, allow_one=False) -> float:
    if isinstance(level, RiskLevel):
        return level.alpha
    a = float(level)
    lo_ok = a > 0.0 or (allow_zero and a == 0.0)
    hi_ok = a < 1.0 or (allow_one and a == 1.0)
    if not (np.isfinite(a) and lo_ok and hi_ok):
        raise ValueError(f"level {level!r} outside the admissible range")
    return a


def value_at_risk(dist: EmpiricalDistribution, level) -> float:
    """Lower quantile inf{x : P(X <= x) >= alpha} of the sorted atoms."""
    a = _tail_level(level, allow_zero=False, allow_one=True)
    C = dist.cumulative_weights
    k = int(np.searchsorted(C, a, side="left"))
    return float(dist.values[min(k, dist.size - 1)])


def _tail_integrals(dist: EmpiricalDistribution, levels: np.ndarray) -> np.ndarray:
    """Exact values of the upper quantile integrals over (level, 1]."""
    v, w = dist.values, dist.weights
    C = dist.cumulative_weights
    suffix = np.concatenate((np.cumsum((w * v)[::-1])[::-1], [0.0]))
    k = np.searchsorted(C, levels, side="right")
    k = np.minimum(k, v.size - 1)
    c_prev = np.where(k > 0, C[np.maximum(k - 1, 0)], 0.0)
    return suffix[k + 1] + v[k] * (np.minimum(C[k], 1.0) - np.maximum(c_prev, levels))


def average_value_at_risk(dist: EmpiricalDistribution, level) -> float:
    """Tail mean of quantiles above ``level``: (1/(1-a)) * int_a^1 F^{-1}(u) du.

    Level 0 returns the mean; levels inside the top atom's weight
    degenerate to that atom's value (the essential supremum region).
    """
    a = _tail_level(level)
    if a == 0.0:
        return dist.mean
    return float(_tail_integrals(dist, np.asarray([a]))[0] / (1.0 - a))


def average_value_at_risk_threshold(dist: EmpiricalDistribution, level) -> float:
    """AVaR via its threshold form min_q { q + E(X-q)_+ / (1-a) }.

    The objective is piecewise linear in q and minimized at any
    a-quantile, so it is evaluated at the Value-at-Risk exactly.
    """
    a = _tail_level(level)
    if a == 0.0:
        return dist.mean
    q = value_at_risk(dist, a)
    return q + float(dist.upper_partial_moment(q)) / (1.0 - a)


class Spectrum:
    """Non-negative, nondecreasing weight density on [0, 1) integrating to one.

    ``cumulative`` is the antiderivative S(u) = int_0^u density; when a
    closed form is supplied, spectral risk values of step quantile
    functions are exact, otherwise S is accumulated by adaptive
    quadrature between consecutive evaluation points.
    """

    def __init__(
        self,
        density: Callable[[np.ndarray], np.ndarray],
        antiderivative: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        name: str = "custom",
        validation_grid: int = 2048,
    ):
        self.density = density
        self.antiderivative = antiderivative
        self.name = name
        u = np.linspace(0.0, 1.0, validation_grid, endpoint=False)
        d = np.asarray(density(u), dtype=float)
        if d.shape != u.shape or not np.all(np.isfinite(d)):
            raise ValueError("spectrum density must be finite on [0, 1)")
        if np.any(d < -1e-12):
            raise ValueError("spectrum density must be non-negative")
        if np.any(np.diff(d) < -1e-9 * max(1.0, float(np.max(np.abs(d))))):
            raise ValueError("spectrum density must be nondecreasing")
        if antiderivative is not None:
            total = float(antiderivative(np.asarray([1.0]))[0] - antiderivative(np.asarray([0.0]))[0])
        else:
            total, _ = quad(lambda t: float(density(np.asarray([t]))[0]), 0.0, 1.0, limit=200)
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"spectrum must integrate to 1, got {total!r}")

    def cumulative(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.antiderivative is not None:
            base = self.antiderivative(np.asarray([0.0]))[0]
            return np.asarray(self.antiderivative(u), dtype=float) - base
        out = np.empty(u.size)
        prev_u, acc = 0.0, 0.0
        for i, ui in enumerate(u):
            if ui > prev_u:
                seg, _ = quad(
                    lambda t: float(self.density(np.asarray([t]))[0]), prev_u, ui, limit=200
                )
                acc += seg
                prev_u = ui
            out[i] = acc
        return out

    def __repr__(self):
        return f"Spectrum({self.name})"


def flat_spectrum() -> Spectrum:
    """The constant spectrum; its spectral risk measure is the expectation."""
    return Spectrum(
        density=lambda u: np.ones_like(u),
        antiderivative=lambda u: np.asarray(u, dtype=float),
        name="flat",
    )


def avar_spectrum(level) -> Spectrum:
    """Spectrum 1/(1-a) on [a, 1), zero below; reproduces AVaR at that level."""
    a = _tail_level(level)
    if a == 0.0:
        return flat_spectrum()
    return Spectrum(
        density=lambda u: np.where(np.asarray(u) >= a, 1.0 / (1.0 - a), 0.0),
        antiderivative=lambda u: np.maximum(0.0, (np.asarray(u, dtype=float) - a)) / (1.0 - a),
        name=f"avar[{a:g}]",
    )


def enveloping_spectrum(level) -> Spectrum:
    """Smallest spectral risk measure dominating the expectile at ``level``.

    Density u -> a(1-a) / (a - u(2a-1))^2 with closed-form
    antiderivative S(u) = 1 - a(1-u)/(a - u(2a-1)); S(1) - S(0) = 1
    analytically.  Defined for a > 1/2 only (below, the density would
    be decreasing and no longer a spectrum).
    """
    a = level_value(level)
    if a <= 0.5:
        raise ValueError("the enveloping spectrum requires a level above 1/2")

    def density(u):
        u = np.asarray(u, dtype=float)
        return a * (1.0 - a) / (a - u * (2.0 * a - 1.0)) ** 2

    def antiderivative(u):
        u = np.asarray(u, dtype=float)
        return 1.0 - a * (1.0 - u) / (a - u * (2.0 * a - 1.0))

    return Spectrum(density=density, antiderivative=antiderivative, name=f"envelope[{a:g}]")


def spectral_risk(dist: EmpiricalDistribution, spectrum: Spectrum) -> float:
    """int_0^1 F^{-1}(u) sigma(u) du for a step quantile function.

    Evaluates sum_i x_i (S(c_i) - S(c_{i-1})) at the cumulative weights
    c_i; exact whenever the spectrum carries its antiderivative.
    """
    C = np.minimum(dist.cumulative_weights, 1.0)
    S = spectrum.cumulative(C)
    increments = np.diff(np.concatenate(([0.0], S)))
    return float(np.dot(dist.values, increments))


def kusuoka_expectile(
    dist: EmpiricalDistribution,
    level,
    gamma_grid_size: int = 1001,
) -> float:
    """Expectile via its representation as a maximum of mean/AVaR mixtures.

    Maximizes gamma*E X + (1-gamma)*AVaR at level (b - 1/gamma)/(b - 1)
    over gamma in [1/b, 1] with b = a/(1-a), on a uniform grid followed
    by golden-section refinement around the best grid point.  The value
    is a lower bound of the expectile converging to it as the grid
    refines.
    """
    a = level_value(level)
    if a <= 0.5:
        raise ValueError("the representation requires a level above 1/2")
    if gamma_grid_size < 2:
        raise ValueError("gamma grid needs at least two points")
    mean = dist.mean
    b = a / (1.0 - a)
    gammas = np.linspace(1.0 / b, 1.0, gamma_grid_size)
    inner = (b - 1.0 / gammas[:-1]) / (b - 1.0)
    vals = gammas[:-1] * mean + (1.0 - gammas[:-1]) * _tail_integrals(dist, inner) / (1.0 - inner)
    vals = np.append(vals, mean)  # gamma = 1 contributes the plain mean

    def objective(g: float) -> float:
        if g >= 1.0:
            return mean
        lv = (b - 1.0 / g) / (b - 1.0)
        return g * mean + (1.0 - g) * float(_tail_integrals(dist, np.asarray([lv]))[0]) / (1.0 - lv)

    i = int(np.argmax(vals))
    lo = gammas[max(i - 1, 0)]
    hi = gammas[min(i + 1, gammas.size - 1)]
    best = float(vals[i])
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = objective(x1), objective(x2)
    while hi - lo > 1e-13:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = objective(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = objective(x1)
    return max(best, f1, f2)


@dataclass(frozen=True)
class ComparisonBoundsReport:
    """Outcome of the sharp expectile/AVaR comparison inequalities.

    ``None`` marks an inequality whose hypotheses do not apply to the
    given distribution and level (non-negativity for the last two,
    level above 1/2 for the mixture band and the mean-ratio bound).
    """

    alpha: float
    nonnegative: bool
    expectile_below_avar: bool
    avar_band: Optional[bool]
    avar_below_scaled_expectile: Optional[bool]
    mean_ratio_bound: Optional[bool]

    @property
    def all_applicable_hold(self) -> bool:
        fields = (
            self.expectile_below_avar,
            self.avar_band,
            self.avar_below_scaled_expectile,
            self.mean_ratio_bound,
        )
        return all(f for f in fields if f is not None)


def check_comparison_bounds(
    dist: EmpiricalDistribution, level, tol: float = 1e-9
) -> ComparisonBoundsReport:
    """Evaluate the four sharp comparison bounds at ``level``.

    1. e_{1/(2-a)}(X) <= AVaR_a(X)                      (any level);
    2. (a/(3a-1)) E X + ((2a-1)/(3a-1)) AVaR_{2-1/a}(X)
         <= e_a(X) <= AVaR_{2-1/a}(X)                   (a > 1/2);
    3. AVaR_a(X) <= e_{1/(2-a)}(X) / (1-a)              (X >= 0);
    4. e_a(X) <= (a/(1-a)) E X                          (X >= 0, a >= 1/2).
    """
    a = level_value(level)
    nonneg = dist.min_value >= 0.0
    avar_a = average_value_at_risk(dist, a)
    e_conj = expectile(dist, 1.0 / (2.0 - a))
    bound1 = e_conj <= avar_a + tol

    if a > 0.5:
        e_a = expectile(dist, a)
        avar_inner = average_value_at_risk(dist, 2.0 - 1.0 / a)
        low = (a / (3.0 * a - 1.0)) * dist.mean + ((2.0 * a - 1.0) / (3.0 * a - 1.0)) * avar_inner
        bound2 = (low <= e_a + tol) and (e_a <= avar_inner + tol)
        bound4 = (e_a <= (a / (1.0 - a)) * dist.mean + tol) if nonneg else None
    else:
        bound2 = None
        bound4 = None

    bound3 = (avar_a <= e_conj / (1.0 - a) + tol) if nonneg else None

    return ComparisonBoundsReport(
        alpha=a,
        nonnegative=nonneg,
        expectile_below_avar=bound1,
        avar_band=bound2,
        avar_below_scaled_expectile=bound3,
        mean_ratio_bound=bound4,
    )
