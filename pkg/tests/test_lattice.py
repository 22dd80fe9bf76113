import numpy as np
import pytest

from expectrisk import (
    EmpiricalDistribution,
    ExplicitLayer,
    LatticeProcess,
    RateClampWarning,
    RescaledLevel,
    RiskRate,
    StencilLayer,
    build_random_walk_lattice,
    conditional_expectile,
    expectile,
    lattice_from_json,
    lattice_to_json,
    nested_expectile,
    rescaled_expectile,
    risk_generator_fd,
    verify_drift_convergence,
)


def chain_lattice(values, times):
    """Deterministic single-path lattice through the given values."""
    layers = [
        ExplicitLayer(np.array([v]), [np.array([0])], [np.array([1.0])])
        for v in values[:-1]
    ]
    layers.append(ExplicitLayer(np.array([values[-1]])))
    return LatticeProcess(times, layers)


def one_step_lattice(x0, increments, probs, dt=1.0):
    layers = [
        ExplicitLayer(
            np.array([x0]),
            [np.arange(len(increments))],
            [np.asarray(probs, dtype=float)],
        ),
        ExplicitLayer(x0 + np.asarray(increments, dtype=float)),
    ]
    return LatticeProcess([0.0, dt], layers)


class TestRescaledLevel:
    def test_alpha_mapping(self):
        assert RescaledLevel(0.0).alpha == 0.5
        assert RescaledLevel(1.0).alpha == 1.0
        assert RescaledLevel(0.25).alpha == 0.75

    @pytest.mark.parametrize("bad", [-0.1, 1.1, np.nan])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            RescaledLevel(bad)


class TestRescaledExpectile:
    def test_budget_zero_is_mean(self, rng):
        d = EmpiricalDistribution(rng.standard_normal(50))
        assert rescaled_expectile(d, 0.0) == pytest.approx(d.mean, abs=1e-12)

    def test_budget_one_is_max(self, rng):
        d = EmpiricalDistribution(rng.standard_normal(50))
        assert rescaled_expectile(d, 1.0) == d.max_value

    def test_quarter_budget_two_atoms(self):
        d = EmpiricalDistribution([0.0, 1.0])
        assert rescaled_expectile(d, 0.25) == pytest.approx(0.75)


class TestConditionalExpectile:
    def test_single_group_is_static(self, rng):
        d = EmpiricalDistribution(rng.standard_normal(30))
        out = conditional_expectile([d], 0.8)
        assert out[0] == pytest.approx(expectile(d, 0.8))

    def test_atom_groups(self):
        groups = [EmpiricalDistribution([1.5]), EmpiricalDistribution([-2.0])]
        np.testing.assert_allclose(conditional_expectile(groups, 0.9), [1.5, -2.0])

    def test_two_groups_at_half(self):
        groups = [EmpiricalDistribution([0.0, 1.0]), EmpiricalDistribution([2.0, 4.0])]
        np.testing.assert_allclose(conditional_expectile(groups, 0.5), [0.5, 3.0])

    def test_per_group_levels(self):
        d = EmpiricalDistribution([0.0, 1.0])
        out = conditional_expectile([d, d], [0.5, 0.75])
        np.testing.assert_allclose(out, [0.5, 0.75])


class TestRiskRate:
    def test_constant(self):
        r = RiskRate(0.3)
        assert r.state_independent
        np.testing.assert_allclose(r(0.0, np.zeros(3)), 0.3)

    def test_callable_validated(self):
        r = RiskRate(lambda t, x: np.full_like(x, 2.0))
        with pytest.raises(ValueError):
            r(0.0, np.zeros(2))
        with pytest.raises(ValueError):
            RiskRate(1.5)


class TestRandomWalkBuilder:
    def test_two_node_single_step(self):
        lat = build_random_walk_lattice(1.0, 0.5, steps=1, quad_nodes=2)
        root = lat.layers[0]
        children = root.offsets * root.step
        np.testing.assert_allclose(children, [-np.sqrt(0.5), np.sqrt(0.5)], atol=1e-15)
        np.testing.assert_allclose(root.probs, [0.5, 0.5])

    def test_probabilities_sum_to_one(self):
        lat = build_random_walk_lattice(0.0, 1.0, steps=6, quad_nodes=15)
        for layer in lat.layers[:-1]:
            assert abs(layer.probs.sum() - 1.0) <= 1e-12

    def test_child_mean_is_parent(self):
        lat = build_random_walk_lattice(0.7, 2.0, steps=4, quad_nodes=21)
        for layer in lat.layers[:-1]:
            drift = float(np.dot(layer.probs, layer.offsets * layer.step))
            assert abs(drift) <= 1e-12

    def test_child_variance_close_to_dt(self):
        lat = build_random_walk_lattice(0.0, 1.0, steps=4, quad_nodes=101, spacing=0.05)
        layer = lat.layers[0]
        var = float(np.dot(layer.probs, (layer.offsets * layer.step) ** 2))
        assert var == pytest.approx(0.25, rel=0.01)

    def test_custom_times(self):
        lat = build_random_walk_lattice(0.0, 1.0, steps=3, times=[0.0, 0.1, 0.6, 1.0])
        assert lat.n_steps == 3
        np.testing.assert_allclose(lat.times, [0.0, 0.1, 0.6, 1.0])

    @pytest.mark.parametrize(
        "kwargs",
        [dict(steps=0), dict(steps=1, quad_nodes=1), dict(steps=1, spacing=-1.0),
         dict(steps=2, times=[0.0, 0.5, 0.25])],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            build_random_walk_lattice(0.0, 1.0, **kwargs)


class TestLatticeValidation:
    def test_root_must_be_single(self):
        layers = [ExplicitLayer(np.array([0.0, 1.0]), [np.array([0])] * 2, [np.array([1.0])] * 2),
                  ExplicitLayer(np.array([0.0]))]
        with pytest.raises(ValueError):
            LatticeProcess([0.0, 1.0], layers)

    def test_probabilities_must_sum(self):
        layers = [ExplicitLayer(np.array([0.0]), [np.array([0, 1])], [np.array([0.5, 0.4])]),
                  ExplicitLayer(np.array([-1.0, 1.0]))]
        with pytest.raises(ValueError):
            LatticeProcess([0.0, 1.0], layers)

    def test_child_indices_in_range(self):
        layers = [ExplicitLayer(np.array([0.0]), [np.array([2])], [np.array([1.0])]),
                  ExplicitLayer(np.array([-1.0, 1.0]))]
        with pytest.raises(ValueError):
            LatticeProcess([0.0, 1.0], layers)

    def test_times_strictly_increasing(self):
        layers = [ExplicitLayer(np.array([0.0]), [np.array([0])], [np.array([1.0])]),
                  ExplicitLayer(np.array([1.0]))]
        with pytest.raises(ValueError):
            LatticeProcess([0.0, 0.0], layers)


class TestNestedExpectile:
    def test_zero_rate_martingale_returns_start(self):
        lat = build_random_walk_lattice(1.5, 1.0, steps=8, quad_nodes=9)
        assert nested_expectile(lat, RiskRate(0.0)) == pytest.approx(1.5, abs=1e-12)

    def test_deterministic_chain_any_rate(self):
        chain = chain_lattice([2.0, 3.5, 1.0], [0.0, 0.5, 1.0])
        for beta in (0.0, 0.4, 1.0):
            assert nested_expectile(chain, RiskRate(beta)) == pytest.approx(1.0, abs=1e-12)

    def test_one_period_collapse(self):
        inc = EmpiricalDistribution([-1.0, 2.0], [0.6, 0.4])
        lat = one_step_lattice(0.3, [-1.0, 2.0], [0.6, 0.4], dt=0.5)
        beta = 0.6
        expected = 0.3 + rescaled_expectile(inc, RescaledLevel(beta * 0.5))
        assert nested_expectile(lat, RiskRate(beta)) == pytest.approx(expected, abs=1e-12)

    def test_translation_equivariance(self, rng):
        lat = build_random_walk_lattice(0.0, 1.0, steps=5, quad_nodes=9)
        lat_shift = build_random_walk_lattice(2.5, 1.0, steps=5, quad_nodes=9)
        r = RiskRate(0.5)
        assert nested_expectile(lat_shift, r) == pytest.approx(
            nested_expectile(lat, r) + 2.5, abs=1e-12
        )

    def test_monotone_in_rate(self):
        lat = build_random_walk_lattice(0.0, 1.0, steps=6, quad_nodes=15)
        vals = [nested_expectile(lat, RiskRate(b)) for b in (0.0, 0.2, 0.5, 0.8, 1.0)]
        assert np.all(np.diff(vals) >= -1e-12)

    def test_fast_path_equals_general_path(self):
        lat = build_random_walk_lattice(0.2, 1.0, steps=5, quad_nodes=9)
        beta = 0.4
        fast = nested_expectile(lat, RiskRate(beta))
        slow = nested_expectile(
            lat, RiskRate(lambda t, x: np.full_like(x, beta), state_independent=False)
        )
        assert fast == slow

    def test_state_dependent_rate_runs(self):
        lat = build_random_walk_lattice(0.0, 1.0, steps=4, quad_nodes=7)
        rate = RiskRate(lambda t, x: np.clip(np.abs(x), 0.0, 1.0))
        v = nested_expectile(lat, rate)
        assert np.isfinite(v)
        assert v >= nested_expectile(lat, RiskRate(0.0)) - 1e-12

    def test_budget_clamp_warns(self):
        # dt = 2 with beta = 1 gives budget 2 > 1
        lat = one_step_lattice(0.0, [-1.0, 1.0], [0.5, 0.5], dt=2.0)
        with pytest.warns(RateClampWarning):
            v = nested_expectile(lat, RiskRate(1.0))
        assert v == pytest.approx(1.0)  # clamped to the essential supremum

    def test_tower_split_refinement(self):
        # inserting a midpoint with the same rate changes the value by O(dt^(3/2))
        beta = 0.8
        diffs = []
        dts = [0.4, 0.2, 0.1]
        for dt in dts:
            n = int(round(1.0 / dt))
            base = build_random_walk_lattice(0.0, 1.0, steps=n, quad_nodes=61, spacing=0.1)
            times = np.linspace(0.0, 1.0, n + 1)
            split_times = np.sort(np.append(times, 0.5 * dt))
            split = build_random_walk_lattice(
                0.0, 1.0, steps=n + 1, quad_nodes=61, spacing=0.1, times=split_times
            )
            r = RiskRate(beta)
            diffs.append(abs(nested_expectile(base, r) - nested_expectile(split, r)))
        for dt, diff in zip(dts, diffs):
            assert diff <= 0.5 * dt**1.5
        assert diffs[-1] <= diffs[0]


class TestRiskGenerator:
    def test_linear_function_pure_noise(self):
        g = risk_generator_fd(
            lambda t, x: x, lambda t, x: 0.0, lambda t, x: 1.0, RiskRate(0.5), 0.0, 0.0
        )
        assert g == pytest.approx(np.sqrt(2 * 0.5 / np.pi), abs=1e-9)

    def test_constant_function_vanishes(self):
        g = risk_generator_fd(
            lambda t, x: 4.2, lambda t, x: 3.0, lambda t, x: 2.0, RiskRate(0.7), 0.3, 1.1
        )
        assert g == pytest.approx(0.0, abs=1e-8)

    def test_quadratic_classical_generator(self):
        g = risk_generator_fd(
            lambda t, x: x * x, lambda t, x: 0.0, lambda t, x: 1.0, RiskRate(0.0), 0.0, 0.0
        )
        assert g == pytest.approx(1.0, abs=1e-7)

    def test_zero_rate_matches_ito_generator_on_polynomials(self):
        mu = lambda t, x: 0.4 - 0.2 * x  # noqa: E731
        sigma = lambda t, x: 0.5 + 0.1 * x  # noqa: E731
        cases = [
            (lambda t, x: x, lambda t, x: (0.4 - 0.2 * x) * 1.0),
            (lambda t, x: x * x, lambda t, x: (0.4 - 0.2 * x) * 2 * x + (0.5 + 0.1 * x) ** 2),
            (lambda t, x: t * x, lambda t, x: x + (0.4 - 0.2 * x) * t),
            (
                lambda t, x: x**3,
                lambda t, x: (0.4 - 0.2 * x) * 3 * x * x + 3 * x * (0.5 + 0.1 * x) ** 2,
            ),
        ]
        for f, exact in cases:
            for t, x in [(0.0, 0.3), (0.5, -1.2), (1.0, 2.0)]:
                got = risk_generator_fd(f, mu, sigma, RiskRate(0.0), t, x)
                # second differences of O(1) values at h ~ 1e-5 carry ~1e-6
                # cancellation noise
                assert got == pytest.approx(exact(t, x), abs=1e-5)


class TestDriftConvergence:
    def test_zero_rate_exact(self):
        rows = verify_drift_convergence(0.0, 1.0, [4, 8])
        for r in rows:
            assert r.error <= 1e-10

    def test_full_rate_decreasing(self):
        rows = verify_drift_convergence(1.0, 1.0, [4, 16, 64])
        errors = [r.error for r in rows]
        assert errors[1] <= errors[0] * 1.1
        assert errors[2] <= errors[1] * 1.1
        assert rows[0].target == pytest.approx(np.sqrt(2 / np.pi))

    def test_half_rate_walk_drift_value(self):
        rows = verify_drift_convergence(0.5, 1.0, [128])
        assert rows[0].target == pytest.approx(np.sqrt(2 * 0.5 / np.pi))  # ~0.5642
        assert rows[0].value == pytest.approx(0.5642, abs=0.005)

    def test_time_dependent_rate_target(self):
        rows = verify_drift_convergence(lambda t: t, 1.0, [64])
        assert rows[0].target == pytest.approx((2.0 / 3.0) * np.sqrt(2 / np.pi), abs=1e-9)
        assert rows[0].error <= 0.03 * rows[0].target

    def test_rejects_bad_constant(self):
        with pytest.raises(ValueError):
            verify_drift_convergence(1.5, 1.0, [4])


class TestSerialization:
    def test_round_trip_stencil(self):
        lat = build_random_walk_lattice(0.3, 1.0, steps=4, quad_nodes=9)
        lat2 = lattice_from_json(lattice_to_json(lat))
        r = RiskRate(0.5)
        assert nested_expectile(lat2, r) == nested_expectile(lat, r)

    def test_round_trip_explicit(self):
        chain = chain_lattice([1.0, 2.0, -1.0], [0.0, 1.0, 2.5])
        chain2 = lattice_from_json(lattice_to_json(chain))
        assert nested_expectile(chain2, RiskRate(0.3)) == pytest.approx(-1.0)

    def test_rejects_unknown_layer_type(self):
        with pytest.raises(ValueError):
            lattice_from_json('{"times": [0, 1], "layers": [{"type": "woozle"}]}')
