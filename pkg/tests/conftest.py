"""Shared helpers: independent oracles and random instance generators.

The oracles deliberately avoid the library's own solution paths: the
expectile oracle minimizes the asymmetric squared loss by grid search
plus golden-section refinement, never touching the first-order
condition solver it is used to check.
"""

import numpy as np
import pytest

from expectrisk import EmpiricalDistribution

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def asymmetric_loss_objective(dist, alpha):
    """x -> sum_i w_i loss_alpha(x_i - x)."""

    def objective(x):
        r = dist.values - x
        return float(np.dot(dist.weights, np.where(r >= 0, alpha, 1 - alpha) * r * r))

    return objective


def golden_minimize(objective, lo, hi, tol=1e-12, max_iter=400):
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = objective(x1), objective(x2)
    for _ in range(max_iter):
        if hi - lo < tol * (1.0 + abs(lo) + abs(hi)):
            break
        if f1 > f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = objective(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = objective(x1)
    return 0.5 * (lo + hi)


def expectile_by_minimization(dist, alpha, grid=2001):
    """Grid search over the support refined by golden section."""
    objective = asymmetric_loss_objective(dist, alpha)
    lo, hi = dist.min_value, dist.max_value
    if lo == hi:
        return lo
    xs = np.linspace(lo, hi, grid)
    vals = [objective(x) for x in xs]
    i = int(np.argmin(vals))
    return golden_minimize(objective, xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)])


def random_distribution(rng, max_atoms=50, nonnegative=False, scale=1.0):
    n = int(rng.integers(1, max_atoms + 1))
    values = rng.standard_normal(n) * scale
    if nonnegative:
        values = np.abs(values)
    weights = rng.uniform(0.1, 1.0, n)
    return EmpiricalDistribution(values, weights)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
