"""Simulation: fixed precision structures, discretization, marginal
links and the latent covariance target."""

import numpy as np
import pytest

from bayesgraph.errors import InputError
from bayesgraph.graphs import Graph, GraphFamily, generate_graph
from bayesgraph.gwishart import pattern_residual
from bayesgraph.simulate import (SimSpec, simulate_data, simulate_precision)


class TestSpec:
    @pytest.mark.parametrize("kwargs", [
        {"n": 0, "p": 3},
        {"n": 10, "p": 1},
        {"n": 10, "p": 3, "cut": 1},
        {"n": 10, "p": 3, "data_type": "categorical"},
    ])
    def test_invalid_specs_rejected(self, kwargs):
        with pytest.raises(InputError):
            SimSpec(**kwargs)

    def test_inconsistent_k_sigma_rejected(self):
        with pytest.raises(InputError):
            SimSpec(n=10, p=2, K=np.eye(2), sigma=2.0 * np.eye(2))


class TestPrecision:
    def test_circle_p4_exact(self):
        g = generate_graph(GraphFamily("circle"), 4)
        K = simulate_precision(g, GraphFamily("circle"))
        want = np.array([[1.0, 0.5, 0.0, 0.4],
                         [0.5, 1.0, 0.5, 0.0],
                         [0.0, 0.5, 1.0, 0.5],
                         [0.4, 0.0, 0.5, 1.0]])
        np.testing.assert_allclose(K, want)

    def test_ar2_band_values(self):
        g = generate_graph(GraphFamily("AR2"), 5)
        K = simulate_precision(g, GraphFamily("AR2"))
        assert np.all(np.diag(K) == 1.0)
        for i in range(4):
            assert K[i, i + 1] == 0.5
        for i in range(3):
            assert K[i, i + 2] == 0.25
        assert K[0, 3] == 0.0 and K[0, 4] == 0.0

    def test_sampled_precision_matches_pattern(self):
        rng = np.random.default_rng(139)
        g = generate_graph(GraphFamily("hub"), 6)
        K = simulate_precision(g, GraphFamily("hub"), rng)
        assert pattern_residual(K, g) <= 1e-8
        np.linalg.cholesky(K)  # SPD


class TestData:
    def test_gaussian_shape_and_kinds(self):
        rng = np.random.default_rng(149)
        out = simulate_data(SimSpec(n=40, p=4, family=GraphFamily("circle")), rng)
        assert out.data.shape == (40, 4)
        assert out.kinds == ["continuous"] * 4
        assert out.graph == generate_graph(GraphFamily("circle"), 4)

    def test_discrete_categories_near_equal(self):
        rng = np.random.default_rng(151)
        out = simulate_data(SimSpec(n=400, p=3, data_type="discrete", cut=4,
                                    family=GraphFamily("circle")), rng)
        for j in range(3):
            vals, counts = np.unique(out.data[:, j], return_counts=True)
            assert set(vals) == {1.0, 2.0, 3.0, 4.0}
            assert np.all((counts > 60) & (counts < 140))
        assert out.kinds == ["ordinal"] * 3

    def test_binary_median_split(self):
        rng = np.random.default_rng(157)
        out = simulate_data(SimSpec(n=200, p=2, data_type="binary",
                                    family=GraphFamily("circle")), rng)
        for j in range(2):
            vals, counts = np.unique(out.data[:, j], return_counts=True)
            assert set(vals) == {1.0, 2.0}
            assert np.all((counts > 70) & (counts < 130))
        assert out.kinds == ["binary"] * 2

    def test_non_gaussian_exponential_marginal(self):
        rng = np.random.default_rng(163)
        out = simulate_data(SimSpec(n=3000, p=2, data_type="non-Gaussian",
                                    family=GraphFamily("circle")), rng)
        assert np.all(out.data >= 0)
        assert abs(out.data[:, 0].mean() - 1.0) < 0.12

    def test_mixed_round_robin_kinds(self):
        rng = np.random.default_rng(167)
        out = simulate_data(SimSpec(n=60, p=7, data_type="mixed",
                                    family=GraphFamily("AR2")), rng)
        assert out.kinds == ["count", "ordinal", "binary", "continuous",
                             "continuous", "count", "ordinal"]
        counts = out.data[:, 0]
        assert np.all(counts >= 0) and np.all(counts == np.round(counts))
        assert set(np.unique(out.data[:, 2])) <= {1.0, 2.0}

    def test_monotone_link_preserves_order(self):
        # the discrete and non-Gaussian maps are monotone in the latent,
        # so two columns generated from the same spec keep rank agreement
        rng = np.random.default_rng(173)
        spec = SimSpec(n=300, p=2, data_type="Gaussian",
                       family=GraphFamily("circle"))
        out = simulate_data(spec, rng)
        x = out.data[:, 0]
        from scipy.stats import expon, norm
        y = expon().ppf(norm.cdf(x))
        order_x = np.argsort(x)
        order_y = np.argsort(y)
        np.testing.assert_array_equal(order_x, order_y)

    def test_supplied_precision_is_used(self):
        rng = np.random.default_rng(179)
        K = np.array([[1.0, 0.5, 0.0, 0.4],
                      [0.5, 1.0, 0.5, 0.0],
                      [0.0, 0.5, 1.0, 0.5],
                      [0.4, 0.0, 0.5, 1.0]])
        g = generate_graph(GraphFamily("circle"), 4)
        spec = SimSpec(n=10, p=4, family=GraphFamily("fixed", fixed=g), K=K)
        out = simulate_data(spec, rng)
        np.testing.assert_allclose(out.K, K)

    def test_latent_covariance_matches_inverse_precision(self):
        rng = np.random.default_rng(181)
        spec = SimSpec(n=50000, p=3, family=GraphFamily("circle"))
        out = simulate_data(spec, rng)
        sigma = np.linalg.inv(out.K)
        emp = out.data.T @ out.data / spec.n
        n = spec.n
        for i in range(3):
            for j in range(3):
                se = np.sqrt((sigma[i, i] * sigma[j, j] + sigma[i, j] ** 2) / n)
                assert abs(emp[i, j] - sigma[i, j]) < 4.0 * se

    def test_determinism(self):
        spec = SimSpec(n=20, p=4, data_type="mixed",
                       family=GraphFamily("random"))
        a = simulate_data(spec, np.random.default_rng(191))
        b = simulate_data(spec, np.random.default_rng(191))
        np.testing.assert_array_equal(a.data, b.data)
        assert a.graph == b.graph
