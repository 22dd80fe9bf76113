import numpy as np
import pytest

from expectrisk import EmpiricalDistribution, LogNormal, Normal, RiskLevel, Uniform01
from expectrisk.distributions import level_value


class TestRiskLevel:
    def test_valid(self):
        assert RiskLevel(0.3).alpha == 0.3

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5, np.nan, np.inf])
    def test_rejects_boundary_and_invalid(self, bad):
        with pytest.raises(ValueError):
            RiskLevel(bad)

    def test_level_value_accepts_both(self):
        assert level_value(RiskLevel(0.7)) == 0.7
        assert level_value(0.7) == 0.7
        with pytest.raises(ValueError):
            level_value(1.0)


class TestEmpiricalDistribution:
    def test_sorts_and_normalizes(self):
        d = EmpiricalDistribution([3.0, 1.0, 2.0], [2.0, 1.0, 1.0])
        assert np.all(np.diff(d.values) > 0)
        assert d.values[0] == 1.0
        np.testing.assert_allclose(d.weights.sum(), 1.0, atol=1e-15)
        np.testing.assert_allclose(d.weights, [0.25, 0.25, 0.5])

    def test_merges_duplicates(self):
        d = EmpiricalDistribution([1.0, 1.0, 2.0], [0.25, 0.25, 0.5])
        assert d.size == 2
        np.testing.assert_allclose(d.weights, [0.5, 0.5])

    def test_drops_zero_weight_atoms(self):
        d = EmpiricalDistribution([0.0, 5.0, 9.0], [0.5, 0.0, 0.5])
        assert d.size == 2
        assert 5.0 not in d.values

    def test_uniform_default_weights(self):
        d = EmpiricalDistribution([4.0, 2.0])
        np.testing.assert_allclose(d.weights, [0.5, 0.5])

    @pytest.mark.parametrize(
        "values,weights",
        [([], None), ([1.0, np.nan], None), ([1.0], [-1.0]), ([1.0, 2.0], [0.0, 0.0]),
         ([1.0, 2.0], [1.0]), ([1.0], [np.inf])],
    )
    def test_rejects_invalid(self, values, weights):
        with pytest.raises(ValueError):
            EmpiricalDistribution(values, weights)

    def test_weights_sum_close_to_one(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 100))
            d = EmpiricalDistribution(rng.standard_normal(n), rng.uniform(0, 5, n) + 1e-3)
            assert abs(d.weights.sum() - 1.0) <= 1e-12

    def test_partial_moments_match_bruteforce(self, rng):
        d = EmpiricalDistribution(rng.standard_normal(40), rng.uniform(0.1, 1, 40))
        for t in [-2.0, -0.3, 0.0, 0.7, 3.0]:
            upper = np.dot(d.weights, np.maximum(d.values - t, 0.0))
            lower = np.dot(d.weights, np.maximum(t - d.values, 0.0))
            assert abs(d.upper_partial_moment(t) - upper) < 1e-14
            assert abs(d.lower_partial_moment(t) - lower) < 1e-14
        ts = np.array([-1.0, 0.0, 1.0])
        np.testing.assert_allclose(
            d.upper_partial_moment(ts), [d.upper_partial_moment(t) for t in ts]
        )

    def test_transformations(self):
        d = EmpiricalDistribution([1.0, 2.0, 4.0], [0.2, 0.3, 0.5])
        neg = d.negated()
        np.testing.assert_allclose(neg.values, [-4.0, -2.0, -1.0])
        np.testing.assert_allclose(neg.weights, [0.5, 0.3, 0.2])
        assert d.shifted(1.0).mean == pytest.approx(d.mean + 1.0)
        assert d.scaled(2.0).mean == pytest.approx(2.0 * d.mean)
        with pytest.raises(ValueError):
            d.scaled(-1.0)

    def test_values_read_only(self):
        d = EmpiricalDistribution([1.0, 2.0])
        with pytest.raises(ValueError):
            d.values[0] = 9.0


class TestAnalytic:
    def test_sigma_validation(self):
        with pytest.raises(ValueError):
            Normal(0.0, 0.0)
        with pytest.raises(ValueError):
            LogNormal(0.0, -1.0)

    def test_means(self):
        assert Uniform01().mean == 0.5
        assert Normal(2.0, 3.0).mean == 2.0
        assert LogNormal(0.0, 1.0).mean == pytest.approx(np.sqrt(np.e))
