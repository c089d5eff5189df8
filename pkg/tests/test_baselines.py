"""
Tests for the Uni and LFKF baseline coresets
"""

import numpy as np
import pytest

from coreset.baselines import lfkf_baseline, pooled_sensitivities, uniform_baseline
from coreset.sampling import importance_sample
from model.likelihood import coreset_objective, reduced_objective
from model.types import TimeSeriesDataset
from utils.rng import stream

from helpers import random_dataset, random_params


class TestUniform:
    def test_full_coverage_has_unit_weights(self, small_panel):
        coreset = uniform_baseline(small_panel, small_panel.total_pairs, seed=3)
        assert coreset.size == small_panel.total_pairs
        assert set(coreset.entity_weights.values()) == {1.0}
        assert all(set(w.values()) == {1.0} for w in coreset.time_weights.values())
        params = random_params(np.random.default_rng(0), 2, 2)
        assert coreset_objective(small_panel, coreset, params) == pytest.approx(
            reduced_objective(small_panel, params), rel=1e-12)

    def test_gamma_is_capped(self, scalar_dataset):
        assert uniform_baseline(scalar_dataset, 50, seed=0).size == 2

    def test_single_entity_weight(self):
        data = TimeSeriesDataset.from_arrays([np.arange(30.0)])
        coreset = uniform_baseline(data, 7, seed=9)
        assert coreset.entity_weights == {0: 1.0}
        assert coreset.size == 7
        assert sum(coreset.time_weights[0].values()) == pytest.approx(30.0)

    def test_distinct_pairs_and_weights(self, small_panel):
        coreset = uniform_baseline(small_panel, 40, seed=1)
        coreset.check(small_panel)
        assert coreset.size == 40
        assert coreset.method == 'uni'
        n_entities = len(coreset.entity_ids)
        for i in coreset.entity_ids:
            assert coreset.entity_weights[i] == pytest.approx(small_panel.N / n_entities)
            times = coreset.time_indices[i]
            assert all(w == pytest.approx(8 / len(times)) for w in coreset.time_weights[i].values())

    def test_seed_determinism(self, small_panel):
        first = uniform_baseline(small_panel, 25, seed=4)
        second = uniform_baseline(small_panel, 25, seed=4)
        assert first.time_weights == second.time_weights

    def test_invalid_gamma(self, small_panel):
        with pytest.raises(ValueError):
            uniform_baseline(small_panel, 0, seed=0)


class TestLFKF:
    def test_identical_points_are_uniform(self):
        data = TimeSeriesDataset.from_arrays([np.ones((4, 2))] * 5)
        scores = pooled_sensitivities(data, 2, seed=0)
        np.testing.assert_allclose(scores, scores[0])

    @pytest.mark.parametrize('k', [1, 2, 4])
    def test_pooled_total(self, k):
        data = random_dataset(np.random.default_rng(k), 12, 10, 2)
        assert pooled_sensitivities(data, k, seed=k).sum() <= 4.0 + 3.0 * k + 1e-9

    def test_structure_and_determinism(self, small_panel):
        coreset = lfkf_baseline(small_panel, 30, 3, seed=6)
        coreset.check(small_panel)
        assert coreset.method == 'lfkf'
        assert 1 <= coreset.size <= 30
        again = lfkf_baseline(small_panel, 30, 3, seed=6)
        assert coreset.time_weights == again.time_weights
        n_entities = len(coreset.entity_ids)
        assert all(w == pytest.approx(small_panel.N / n_entities) for w in coreset.entity_weights.values())

    def test_weights_map_static_importance_weights(self):
        # with T_i = N every pair carries w(i) w^(i)(t) = u, its static importance weight
        data = random_dataset(np.random.default_rng(3), 6, 6, 1, t_min=6)
        coreset = lfkf_baseline(data, 20, 2, seed=2)
        drawn = importance_sample(pooled_sensitivities(data, 2, seed=2), 20, stream(2, 'lfkf'))
        assert coreset.size == len(drawn)
        for flat, u in drawn.items():
            i, t = divmod(flat, 6)
            assert coreset.entity_weights[i] * coreset.time_weights[i][t + 1] == pytest.approx(u)
