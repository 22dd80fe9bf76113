"""Expectiles of empirical and analytic distributions.

The expectile e_alpha(X) is the unique solution of the first-order
condition

    alpha * E(X - x)_+ = (1 - alpha) * E(x - X)_+,

equivalently the minimizer of the asymmetric squared loss
``expectile_loss``.  For discrete distributions the condition is
piecewise linear in x, so after locating the bracketing pair of atoms
the root is solved exactly; no iteration error remains.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from .distributions import (
    EmpiricalDistribution,
    LogNormal,
    Normal,
    RiskLevel,
    Uniform01,
    level_value,
)

__all__ = [
    "expectile_loss",
    "pinball_loss",
    "expectile",
    "expectile_rows",
    "expectile_analytic",
    "expectile_series_normal",
    "expectile_series_lognormal",
]


def expectile_loss(x, level: "RiskLevel | float"):
    """Asymmetric squared scoring function: alpha*x^2 above zero, (1-alpha)*x^2 below."""
    a = level_value(level)
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0.0, a, 1.0 - a) * x * x
    return float(out) if out.ndim == 0 else out

def pinball_loss(x, level: "RiskLevel | float"):
    """Asymmetric absolute scoring function whose minimizer is the alpha-quantile."""
    a = level_value(level)
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0.0, a * x, -(1.0 - a) * x)
    return float(out) if out.ndim == 0 else out


def expectile(dist: EmpiricalDistribution, level: "RiskLevel | float") -> float:
    """Expectile of an empirical distribution, solved exactly.

    g(x) = (1-alpha) E(x-X)_+ - alpha E(X-x)_+ is continuous, piecewise
    linear and strictly increasing on the support.  We locate the first
    atom where g >= 0 and solve the linear piece before it in closed
    form.  At alpha = 1/2 the formula collapses to the weighted mean.
    """
    a = level_value(level)
    v, C, M = dist.values, dist.cumulative_weights, dist.cumulative_weighted_values
    if v.size == 1:
        return float(v[0])
    x = _piecewise_root(v, C, M, a)
    return float(x)


def expectile_rows(values: np.ndarray, probs: np.ndarray, levels) -> np.ndarray:
    """Row-wise expectiles of a batch of discrete distributions.

    ``values`` and ``probs`` are (n, m) arrays; row weights need not be
    normalized.  ``levels`` is scalar or (n,) with entries in (0, 1];
    level 1 returns the row maximum (essential supremum).
    """
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    a = np.broadcast_to(np.asarray(levels, dtype=float), (values.shape[0],)).copy()
    if np.any(a <= 0.0) or np.any(a > 1.0):
        raise ValueError("row levels must lie in (0, 1]")

    order = np.argsort(values, axis=1, kind="stable")
    v = np.take_along_axis(values, order, axis=1)
    p = np.take_along_axis(probs, order, axis=1)
    total = p.sum(axis=1, keepdims=True)
    C = np.cumsum(p, axis=1) / total
    M = np.cumsum(p * v, axis=1) / total

    out = np.empty(values.shape[0])
    top = a >= 1.0
    if np.any(top):
        out[top] = v[top, -1]
    rest = ~top
    if np.any(rest):
        vr, Cr, Mr = v[rest], C[rest], M[rest]
        ar = a[rest]
        g = vr * (ar[:, None] + (1.0 - 2.0 * ar[:, None]) * Cr) - (
            ar[:, None] * Mr[:, -1:] + (1.0 - 2.0 * ar[:, None]) * Mr
        )
        k = np.argmax(g >= 0.0, axis=1)
        rows = np.arange(k.size)
        km1 = np.maximum(k - 1, 0)
        num = ar * Mr[:, -1] + (1.0 - 2.0 * ar) * Mr[rows, km1]
        den = ar + (1.0 - 2.0 * ar) * Cr[rows, km1]
        x = np.clip(num / den, vr[rows, km1], vr[rows, k])
        x = np.where(k == 0, np.where(g[:, 0] < 0.0, vr[:, -1], vr[:, 0]), x)
        out[rest] = x
    return out


def _piecewise_root(v, C, M, a):
    """Root of the piecewise-linear first-order condition on sorted atoms."""
    total = M[-1]
    g = v * (a + (1.0 - 2.0 * a) * C) - (a * total + (1.0 - 2.0 * a) * M)
    k = int(np.argmax(g >= 0.0))
    if k == 0:
        # g < 0 everywhere can only happen through rounding; the root
        # then sits at the top atom.  g(v[0]) >= 0 means the minimum atom.
        return v[-1] if g[0] < 0.0 else v[0]
    num = a * total + (1.0 - 2.0 * a) * M[k - 1]
    den = a + (1.0 - 2.0 * a) * C[k - 1]
    x = num / den
    # guard against rounding pushing the root out of its bracket
    return min(max(x, v[k - 1]), v[k])


def expectile_analytic(dist, level: "RiskLevel | float") -> float:
    """Expectile of a uniform, normal or log-normal distribution.

    Uniform: closed form (alpha - sqrt(alpha(1-alpha))) / (2 alpha - 1),
    with the removable singularity at alpha = 1/2 giving 1/2.  Normal:
    Newton iteration on the exact implicit equation built from the
    normal partial moments, started at the cubic series value.
    Log-normal: bracketed root finding on the exact partial moments.
    """
    a = level_value(level)
    if isinstance(dist, Uniform01):
        if a == 0.5:
            return 0.5
        return (a - np.sqrt(a * (1.0 - a))) / (2.0 * a - 1.0)
    if isinstance(dist, Normal):
        return dist.mu + dist.sigma * _standard_normal_expectile(a)
    if isinstance(dist, LogNormal):
        return _lognormal_expectile(dist.mu, dist.sigma, a)
    raise TypeError(f"unsupported analytic distribution: {dist!r}")


def _normal_foc(a: float, e: float) -> float:
    """(2a-1)(phi(e) + e Phi(e)) - a e; zero exactly at the standard normal expectile."""
    return (2.0 * a - 1.0) * (norm.pdf(e) + e * norm.cdf(e)) - a * e


def _standard_normal_expectile(a: float) -> float:
    e = expectile_series_normal(0.0, 1.0, a)
    for _ in range(100):
        denom = (2.0 * a - 1.0) * norm.cdf(e) - a
        step = _normal_foc(a, e) / denom
        e_new = e - step
        if not -10.0 < e_new < 10.0:
            break
        e = e_new
        if abs(step) <= 1e-15 * (1.0 + abs(e)):
            return e
    # Newton left the trust region or stalled: brentq on an expanding bracket
    lo, hi = -10.0, 10.0
    while _normal_foc(a, lo) < 0.0:
        lo *= 2.0
    while _normal_foc(a, hi) > 0.0:
        hi *= 2.0
    return brentq(lambda t: _normal_foc(a, t), lo, hi, xtol=1e-15, rtol=8.9e-16)


def _lognormal_expectile(mu: float, sigma: float, a: float) -> float:
    m = float(np.exp(mu + 0.5 * sigma * sigma))

    def upper(t):  # E(X - t)_+
        if t <= 0.0:
            return m - t
        d = (np.log(t) - mu) / sigma
        return m * norm.cdf(sigma - d) - t * norm.cdf(-d)

    def g(t):
        low = t - m + upper(t)  # E(t - X)_+ via E(t-X)_+ - E(X-t)_+ = t - E X
        return (1.0 - a) * low - a * upper(t)

    lo = float(np.exp(mu - 12.0 * sigma))
    hi = m
    while g(lo) > 0.0:
        lo *= 0.5
    while g(hi) < 0.0:
        hi *= 2.0
    return brentq(g, lo, hi, xtol=1e-14, rtol=8.9e-16)


def expectile_series_normal(mu: float, sigma: float, level: "RiskLevel | float") -> float:
    """Cubic series of the normal expectile around alpha = 1/2.

    mu + sigma*sqrt(8/pi)*(a - 1/2) + sigma*(8*sqrt(2)/pi^(3/2))*(a - 1/2)^3;
    the remainder is of fifth order in (a - 1/2).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = level_value(level) - 0.5
    return mu + sigma * np.sqrt(8.0 / np.pi) * d + sigma * (8.0 * np.sqrt(2.0) / np.pi**1.5) * d**3


def expectile_series_lognormal(mu: float, sigma: float, level: "RiskLevel | float") -> float:
    """First-order series of the log-normal expectile around alpha = 1/2.

    exp(mu + sigma^2/2)
      + (exp(sigma^2) - 1) * exp(2 mu + sigma^2) * (a - 1/2) * 4 sqrt(e) * (2 Phi(1/2) - 1).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = level_value(level) - 0.5
    mean = np.exp(mu + 0.5 * sigma * sigma)
    slope = (
        (np.exp(sigma * sigma) - 1.0)
        * np.exp(2.0 * mu + sigma * sigma)
        * 4.0
        * np.sqrt(np.e)
        * (2.0 * norm.cdf(0.5) - 1.0)
    )
    return float(mean + slope * d)
