"""
Shared fixtures
"""

import numpy as np
import pytest

from model.types import Component, EntitySeries, MixtureParams, ModelBounds, TimeSeriesDataset
from utils.config import config


@pytest.fixture
def scalar_entity() -> EntitySeries:
    """d = 1, x = (2, 3)"""
    return EntitySeries(0, np.array([2.0, 3.0]))


@pytest.fixture
def scalar_dataset(scalar_entity) -> TimeSeriesDataset:
    return TimeSeriesDataset((scalar_entity,), 1)


@pytest.fixture
def ar_component() -> Component:
    """mu = 0, Sigma = [1], Lambda = diag(0.5)"""
    return Component(mu=np.zeros(1), sigma=np.eye(1), ar=np.array([0.5]))


@pytest.fixture
def white_params() -> MixtureParams:
    """k = 1, d = 1, mu = 0, Sigma = [1], Lambda = 0"""
    return MixtureParams(alpha=np.ones(1), components=(Component(np.zeros(1), np.eye(1), np.zeros(1)),))


@pytest.fixture
def bounds() -> ModelBounds:
    return ModelBounds(d_ratio=1.0, lambda_param=0.25)


@pytest.fixture
def small_panel() -> TimeSeriesDataset:
    """Three well-separated groups of short 2-d series"""
    rng = np.random.default_rng(11)
    centres = np.array([[-6.0, 0.0], [0.0, 6.0], [6.0, 0.0]])
    arrays = [centres[i % 3] + 0.3 * rng.standard_normal((8, 2)) for i in range(18)]
    return TimeSeriesDataset.from_arrays(arrays)


@pytest.fixture
def isolated_env(tmp_path, monkeypatch):
    """Run CLI commands inside tmp_path with no ledger and a fixed thread count"""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv('TSC_THREADS', raising=False)
    monkeypatch.setitem(config.config, 'TSC_THREADS', None)
    monkeypatch.setitem(config.config, 'RUN_LEDGER', None)
    monkeypatch.setitem(config.config, 'DATA_DIR', str(tmp_path / 'data'))
    return tmp_path
