"""
Random instances and brute-force oracles shared by the tests
"""

from itertools import product

import numpy as np

from model.types import Component, MixtureParams, TimeSeriesDataset


def random_dataset(rng: np.random.Generator, n: int, t_max: int, d: int, t_min: int = 1) -> TimeSeriesDataset:
    """n entities with lengths in [t_min, t_max] and N(0, 4 I) observations"""
    lengths = rng.integers(t_min, t_max + 1, size=n)
    return TimeSeriesDataset.from_arrays([2.0 * rng.standard_normal((t, d)) for t in lengths])


def random_params(rng: np.random.Generator, k: int, d: int, lambda_param: float = 0.01) -> MixtureParams:
    """Well-conditioned random mixture with AR entries inside [0, 1 - sqrt(lambda)]"""
    ar_max = 1.0 - np.sqrt(lambda_param)
    components = []
    for _ in range(k):
        a = rng.uniform(-1.0, 1.0, size=(d, d))
        components.append(Component(
            mu=rng.standard_normal(d),
            sigma=a @ a.T + 0.5 * np.eye(d),
            ar=rng.uniform(0.0, ar_max, size=d),
        ))
    alpha = rng.dirichlet(np.ones(k))
    return MixtureParams(alpha=alpha / alpha.sum(), components=tuple(components))


def unit_component(d: int, mu=None, ar=0.0) -> Component:
    mu = np.zeros(d) if mu is None else np.asarray(mu, dtype=np.float64)
    return Component(mu=mu, sigma=np.eye(d), ar=np.full(d, ar))


def best_partition_cost(points: np.ndarray, k: int) -> float:
    """Exhaustive k-means optimum over all labelings with every cluster nonempty"""
    best = np.inf
    n = points.shape[0]
    for labels in product(range(k), repeat=n):
        labels = np.array(labels)
        if len(set(labels.tolist())) != k:
            continue
        cost = sum(np.sum((points[labels == j] - points[labels == j].mean(axis=0)) ** 2) for j in range(k))
        best = min(best, cost)
    return float(best)
