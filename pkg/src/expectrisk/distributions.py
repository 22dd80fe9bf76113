"""Domain types: risk levels, empirical distributions, analytic distributions.

An :class:`EmpiricalDistribution` is the workhorse representation of a
random variable throughout the package: sorted atoms with non-negative
weights summing to one.  Analytic distributions (uniform on [0,1],
normal, log-normal) are kept as small tagged types so closed-form and
series reference values can be dispatched on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "RiskLevel",
    "level_value",
    "EmpiricalDistribution",
    "Uniform01",
    "Normal",
    "LogNormal",
    "AnalyticDistribution",
]


@dataclass(frozen=True)
class RiskLevel:
    """Asymmetry level alpha, strictly inside (0, 1)."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not np.isfinite(a) or not 0.0 < a < 1.0:
            raise ValueError(f"risk level must lie strictly in (0, 1), got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)


def level_value(level: "RiskLevel | float") -> float:
    """Return the float in (0, 1) carried by ``level``, validating plain floats."""
    if isinstance(level, RiskLevel):
        return level.alpha
    return RiskLevel(float(level)).alpha


class EmpiricalDistribution:
    """Discrete distribution with strictly ascending atoms.

    Construction sorts the atoms, merges duplicates (summing their
    weights), drops zero-weight atoms and normalizes the weights to sum
    to one.  Arrays are read-only after construction; all derived
    quantities (cumulative weights, partial moments) treat the object
    as immutable.
    """

    __slots__ = ("values", "weights", "_cumweights", "_cumvw")

    def __init__(self, values, weights=None):
        v = np.atleast_1d(np.asarray(values, dtype=float))
        if v.ndim != 1 or v.size == 0:
            raise ValueError("values must be a non-empty 1-d array")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        if weights is None:
            w = np.full(v.size, 1.0 / v.size)
        else:
            w = np.atleast_1d(np.asarray(weights, dtype=float))
            if w.shape != v.shape:
                raise ValueError("weights must match values in length")
            if not np.all(np.isfinite(w)) or np.any(w < 0.0):
                raise ValueError("weights must be finite and non-negative")
            total = w.sum()
            if total <= 0.0:
                raise ValueError("weights must not all vanish")
            w = w / total

        order = np.argsort(v, kind="stable")
        v, w = v[order], w[order]
        # merge exact duplicates so the atoms are strictly ascending
        keep = np.empty(v.size, dtype=bool)
        keep[0] = True
        np.not_equal(v[1:], v[:-1], out=keep[1:])
        idx = np.cumsum(keep) - 1
        merged_w = np.zeros(int(idx[-1]) + 1)
        np.add.at(merged_w, idx, w)
        v = v[keep]
        nonzero = merged_w > 0.0
        v, w = v[nonzero], merged_w[nonzero]
        if v.size == 0:
            raise ValueError("all atoms have zero weight")
        w = w / w.sum()
        v.setflags(write=False)
        w.setflags(write=False)
        self.values = v
        self.weights = w
        self._cumweights = None
        self._cumvw = None

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalDistribution":
        """Equally weighted distribution of the given sample values."""
        return cls(samples)

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def cumulative_weights(self) -> np.ndarray:
        if self._cumweights is None:
            c = np.cumsum(self.weights)
            c.setflags(write=False)
            self._cumweights = c
        return self._cumweights

    @property
    def cumulative_weighted_values(self) -> np.ndarray:
        if self._cumvw is None:
            m = np.cumsum(self.weights * self.values)
            m.setflags(write=False)
            self._cumvw = m
        return self._cumvw

    @property
    def mean(self) -> float:
        return float(self.cumulative_weighted_values[-1])

    @property
    def min_value(self) -> float:
        return float(self.values[0])

    @property
    def max_value(self) -> float:
        return float(self.values[-1])

    def upper_partial_moment(self, t) -> "np.ndarray | float":
        """E(X - t)_+ for scalar or array thresholds ``t``."""
        t_arr = np.asarray(t, dtype=float)
        k = np.searchsorted(self.values, t_arr, side="right")
        tail_vw = _suffix(self.cumulative_weighted_values)[k]
        tail_w = _suffix(self.cumulative_weights)[k]
        out = tail_vw - t_arr * tail_w
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def lower_partial_moment(self, t) -> "np.ndarray | float":
        """E(t - X)_+ for scalar or array thresholds ``t``."""
        t_arr = np.asarray(t, dtype=float)
        k = np.searchsorted(self.values, t_arr, side="right")
        head_vw = np.concatenate(([0.0], self.cumulative_weighted_values))[k]
        head_w = np.concatenate(([0.0], self.cumulative_weights))[k]
        out = t_arr * head_w - head_vw
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def negated(self) -> "EmpiricalDistribution":
        """Distribution of -X."""
        return EmpiricalDistribution(-self.values[::-1], self.weights[::-1])

    def shifted(self, c: float) -> "EmpiricalDistribution":
        """Distribution of X + c."""
        return EmpiricalDistribution(self.values + c, self.weights)

    def scaled(self, factor: float) -> "EmpiricalDistribution":
        """Distribution of factor * X for factor > 0."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return EmpiricalDistribution(self.values * factor, self.weights)

    def __repr__(self):
        return f"EmpiricalDistribution(n={self.size}, mean={self.mean:.6g})"


def _suffix(cumulative: np.ndarray) -> np.ndarray:
    """Suffix sums [total - cum_before_k] with a trailing zero, length n+1."""
    total = cumulative[-1]
    return np.concatenate((total - np.concatenate(([0.0], cumulative[:-1])), [0.0]))


@dataclass(frozen=True)
class Uniform01:
    """Uniform distribution on the unit interval."""

    @property
    def mean(self) -> float:
        return 0.5


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive")

    @property
    def mean(self) -> float:
        return self.mu


@dataclass(frozen=True)
class LogNormal:
    """exp(Z) with Z ~ Normal(mu, sigma^2)."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive")

    @property
    def mean(self) -> float:
        return float(np.exp(self.mu + 0.5 * self.sigma**2))


AnalyticDistribution = Union[Uniform01, Normal, LogNormal]
