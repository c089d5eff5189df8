"""
Tests for the synthetic panel generator
"""

import numpy as np
import pytest
from scipy import stats

from generate.synthetic import GenConfig, draw_params, generate, simulate_entity
from model.types import Component, MixtureParams, ModelBounds


class TestGenConfig:
    @pytest.mark.parametrize('kwargs', [
        dict(n_entities=0, series_len=5),
        dict(n_entities=5, series_len=5, lambda_param=1.0),
        dict(n_entities=5, series_len=5, init='burn-in'),
        dict(n_entities=5, series_len=5, seed=-1),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            GenConfig(**kwargs)

    def test_presets(self):
        gen = GenConfig.from_preset('synthetic1', seed=7)
        assert (gen.n_entities, gen.series_len, gen.d, gen.k, gen.seed) == (500, 500, 2, 3, 7)
        assert GenConfig.from_preset('desk', seed=0, n_entities=20).n_entities == 20
        with pytest.raises(ValueError):
            GenConfig.from_preset('nope', seed=0)


class TestDrawParams:
    def test_single_component(self):
        params = draw_params(GenConfig(4, 3, d=1, k=1, seed=1))
        assert params.alpha.tolist() == [1.0]

    @pytest.mark.parametrize('seed', range(10))
    def test_admissible(self, seed):
        gen = GenConfig(4, 3, d=3, k=4, lambda_param=0.04, seed=seed)
        params = draw_params(gen)
        params.check(ModelBounds.from_params(params, gen.lambda_param))
        for comp in params.components:
            assert np.linalg.eigvalsh(comp.sigma)[0] > 0.0
            assert np.all(comp.ar >= 0.0) and np.all(comp.ar <= 0.8)


class TestGenerate:
    def test_shape_and_determinism(self):
        gen = GenConfig(n_entities=6, series_len=5, d=2, k=2, seed=3)
        data, truth = generate(gen)
        again, _ = generate(gen, threads=4)
        assert data.N == 6 and data.d == 2 and data.total_pairs == 30
        assert truth.labels.shape == (6,)
        for a, b in zip(data, again):
            np.testing.assert_array_equal(a.observations, b.observations)

    def test_parameter_shape_mismatch(self):
        gen = GenConfig(n_entities=3, series_len=4, d=2, k=2, seed=0)
        with pytest.raises(ValueError):
            generate(gen, params=draw_params(GenConfig(3, 4, d=2, k=3, seed=0)))

    def test_labels_follow_alpha(self):
        gen = GenConfig(n_entities=3000, series_len=1, d=1, k=3, seed=5)
        data, truth = generate(gen)
        observed = np.bincount(truth.labels, minlength=3)
        expected = truth.params.alpha * gen.n_entities
        mask = expected > 0
        assert stats.chisquare(observed[mask], expected[mask]).pvalue > 1e-3


class TestSimulateEntity:
    def test_white_noise_panel_mean(self):
        white = MixtureParams(np.ones(1), (Component(np.zeros(1), np.eye(1), np.zeros(1)),))
        seeds = range(40)
        within = 0
        for seed in seeds:
            data, _ = generate(GenConfig(n_entities=100, series_len=100, d=1, k=1, seed=seed), params=white)
            panel = np.concatenate([e.observations[:, 0] for e in data])
            within += abs(panel.mean()) <= 0.05
        assert within >= 0.95 * len(seeds)

    def test_long_run_mean(self):
        comp = Component(np.array([1.0, -2.0]), np.eye(2), np.array([0.5, 0.5]))
        entity = simulate_entity(0, comp, 20000, seed=11)
        np.testing.assert_allclose(entity.observations.mean(axis=0), [1.0, -2.0], atol=0.07)

    def test_lag_one_autocorrelation(self):
        comp = Component(np.zeros(1), np.eye(1), np.array([0.8]))
        x = simulate_entity(2, comp, 20000, seed=4).observations[:, 0]
        x = x - x.mean()
        assert np.dot(x[1:], x[:-1]) / np.dot(x, x) == pytest.approx(0.8, abs=0.03)

    def test_zero_start(self):
        comp = Component(np.full(1, 3.0), np.array([[1e-6]]), np.array([0.5]))
        x = simulate_entity(0, comp, 2, seed=0, init='zero').observations
        assert x[0, 0] == pytest.approx(3.0, abs=0.01)
