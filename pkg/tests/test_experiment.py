"""
Tests for the experiment harness
"""

import math

import numpy as np
import pytest

from evaluate import experiment
from evaluate.experiment import ReportRow, SizeSpec, aggregate, likelihood_ratio, run_experiment
from fit.em import FitConfig, fit
from generate.synthetic import GenConfig, generate
from model.types import ModelBounds
from utils.errors import NumericError

SMALL = GenConfig(n_entities=12, series_len=6, d=1, k=2, seed=3)
QUICK_FIT = FitConfig(k=2, max_iters=5, seed=1)
SIZES = SizeSpec(m_entities=5, l_times=3)


def test_likelihood_ratio():
    assert likelihood_ratio(100.0, 109.0) == pytest.approx(18.0)
    assert likelihood_ratio(100.0, 99.0) == pytest.approx(-2.0)


def test_size_spec():
    bounds = ModelBounds(1.0, math.exp(-1.0))
    assert SizeSpec().sizes(1.0, 1, 1, bounds) == (6, 3)
    assert SizeSpec(m_entities=10, l_times=4).sizes(0.1, 3, 2, bounds) == (10, 4)
    assert SizeSpec(l_times=4).sizes(1.0, 1, 1, bounds) == (6, 4)


def test_aggregate():
    rows = [
        ReportRow('crgmm', 0.1, 0, 10.0, 2.0, 30, 0.1, 0.2),
        ReportRow('crgmm', 0.1, 1, 12.0, 4.0, 34, 0.1, 0.2),
        ReportRow('uni', 0.1, 0, 11.0, 3.0, 30, 0.0, 0.1),
    ]
    crgmm, uni = aggregate(rows)
    assert (crgmm.method, crgmm.n_reps) == ('crgmm', 2)
    assert crgmm.gamma_mean == pytest.approx(3.0)
    assert crgmm.gamma_std == pytest.approx(math.sqrt(2.0))
    assert crgmm.size_mean == pytest.approx(32.0)
    assert crgmm.time_mean == pytest.approx(0.3)
    assert uni.n_reps == 1 and math.isnan(uni.gamma_std)
    assert aggregate([]) == []


class TestRunExperiment:
    def test_rows_and_matched_sizes(self):
        report = run_experiment(SMALL, [0.5, 0.8], 2, QUICK_FIT, SIZES)
        assert report.failures == 0
        assert len(report.rows) == 2 * 2 * 3
        assert [(r.epsilon, r.method, r.rep) for r in report.rows[:3]] == [
            (0.5, 'crgmm', 0), (0.5, 'crgmm', 1), (0.5, 'uni', 0)]
        by_key = {}
        for row in report.rows:
            by_key.setdefault((row.epsilon, row.rep), {})[row.method] = row.size
            assert row.gamma == pytest.approx(2.0 * (row.v_s - report.v_full))
        for sizes in by_key.values():
            assert sizes['uni'] == sizes['crgmm']
            # duplicate draws merge, so LFKF can hold fewer distinct pairs
            assert 1 <= sizes['lfkf'] <= sizes['crgmm']
        assert len(report.aggregates) == 6
        frame = report.rows_frame()
        assert list(frame.columns) == ['method', 'epsilon', 'rep', 'v_s', 'gamma', 'size', 't_c', 't_s']
        assert report.to_dict()['settings']['reps'] == 2

    def test_row_size_is_the_fitted_coreset_size(self, monkeypatch):
        fitted = []

        def recording_fit(data, coreset=None, config=None, init=None):
            if coreset is not None:
                fitted.append((coreset.method, coreset.size))
            return fit(data, coreset, config, init)

        monkeypatch.setattr(experiment, 'fit', recording_fit)
        report = run_experiment(SMALL, [0.5], 3, QUICK_FIT, SIZES)
        assert sorted(fitted) == sorted((r.method, r.size) for r in report.rows)

    def test_baselines_run_when_crgmm_fails(self, monkeypatch):
        def failing_build(data, config):
            raise NumericError("sensitivities are not finite")

        monkeypatch.setattr(experiment, 'build_coreset', failing_build)
        report = run_experiment(SMALL, [0.5], 2, QUICK_FIT, SIZES)
        assert report.failures == 2
        assert sorted((r.method, r.rep) for r in report.rows) == [
            ('lfkf', 0), ('lfkf', 1), ('uni', 0), ('uni', 1)]
        # without a coreset the baselines fall back to M L draws
        assert all(r.size == 5 * 3 for r in report.rows if r.method == 'uni')
        assert {a.method: a.n_reps for a in report.aggregates} == {'uni': 2, 'lfkf': 2}

    def test_full_coverage_gives_zero_gamma(self):
        report = run_experiment(SMALL, [0.5], 2, QUICK_FIT, SIZES, full_coverage=True)
        assert report.failures == 0
        assert all(row.gamma == 0.0 for row in report.rows)
        assert all(row.size == SMALL.n_entities * SMALL.series_len for row in report.rows)

    def test_deterministic_across_threads(self):
        serial = run_experiment(SMALL, [0.5], 2, QUICK_FIT, SIZES, threads=1)
        threaded = run_experiment(SMALL, [0.5], 2, QUICK_FIT, SIZES, threads=4)
        assert [r.v_s for r in serial.rows] == [r.v_s for r in threaded.rows]

    def test_supplied_data_needs_bounds(self):
        data, truth = generate(SMALL)
        with pytest.raises(ValueError):
            run_experiment(SMALL, [0.5], 1, QUICK_FIT, SIZES, data=data)
        bounds = ModelBounds.from_params(truth.params, SMALL.lambda_param)
        report = run_experiment(SMALL, [0.5], 1, QUICK_FIT, SIZES, methods=('crgmm',), data=data, bounds=bounds)
        assert [r.method for r in report.rows] == ['crgmm']

    @pytest.mark.parametrize('kwargs', [dict(reps=0), dict(methods=('uni',)), dict(methods=('crgmm', 'kmeans'))])
    def test_invalid(self, kwargs):
        args = dict(reps=1, methods=('crgmm', 'uni', 'lfkf'))
        args.update(kwargs)
        with pytest.raises(ValueError):
            run_experiment(SMALL, [0.5], args['reps'], QUICK_FIT, SIZES, methods=args['methods'])


@pytest.fixture(scope='module')
def desk_report():
    gen = GenConfig.from_preset('desk', seed=1)
    return run_experiment(gen, [0.1, 0.3], 5, FitConfig(k=3, seed=1), SizeSpec(m_entities=60, l_times=40), threads=4)


@pytest.mark.slow
def test_desk_experiment_runs(desk_report):
    assert desk_report.failures == 0
    assert {a.method for a in desk_report.aggregates} == {'crgmm', 'uni', 'lfkf'}
    assert all(np.isfinite(a.gamma_mean) for a in desk_report.aggregates)


@pytest.mark.slow
@pytest.mark.xfail(strict=False, reason="at lambda=0.01 every capped entity and time sensitivity is 1, so CRGMM "
                                        "samples uniformly with replacement; see DESIGN.md")
def test_desk_crgmm_has_the_lowest_mean_gamma(desk_report):
    means = {(a.method, a.epsilon): a.gamma_mean for a in desk_report.aggregates}
    for epsilon in (0.1, 0.3):
        assert means['crgmm', epsilon] <= means['uni', epsilon]
        assert means['crgmm', epsilon] <= means['lfkf', epsilon]
