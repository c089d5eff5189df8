"""
Sensitivity upper bounds for the two sampling stages

Entity stage: with b_i the entity means, C* and OPT^(O) an approximate k-means
solution over them, and A = sum_i a_i,

    s^c(i) = 1 / |cluster of i|
    s(i)   = min{1, 4D (4 ||b_i - c*_p(i)||^2 / (OPT^(O) + A) + 3 s^c(i)) / lambda}

Time stage, per entity with OPT_i^(O) the 1-means cost of its observations,

    s_i^c(t) = 2 ||x_it - b_i||^2 / OPT_i^(O) + 6 / T_i
    s_i(t)   = min{1, 4D (s_i^c(t) + s_i^c(t-1)) / lambda}     (no lag term at t = 1)

A distance term over a zero denominator is taken as 0.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from cluster.kmeans import DEFAULT_RESTARTS, KMeansResult, entity_summaries, kmeans_entities, one_means_cost
from model.types import EntitySeries, ModelBounds, TimeSeriesDataset

logger = logging.getLogger(__name__)


@dataclass
class SensitivityProfile:
    """Entity and per-entity time sensitivities with the k-means artifacts behind them"""
    s: np.ndarray
    s_cluster: np.ndarray
    kmeans: KMeansResult
    summaries: Tuple[np.ndarray, np.ndarray, float]
    s_i: Dict[int, np.ndarray] = field(default_factory=dict)
    s_i_cluster: Dict[int, np.ndarray] = field(default_factory=dict)
    opt_i: Dict[int, float] = field(default_factory=dict)

    @property
    def total_s(self) -> float:
        return float(self.s.sum())

    def entity_bound(self, bounds: ModelBounds) -> float:
        """(16 D + 12 D k) / lambda"""
        return (16.0 + 12.0 * self.kmeans.k) * bounds.d_ratio / bounds.lambda_param

    @staticmethod
    def time_bound(bounds: ModelBounds) -> float:
        """64 D / lambda"""
        return 64.0 * bounds.d_ratio / bounds.lambda_param

    def to_dict(self) -> dict:
        b, a, total_a = self.summaries
        return {
            's': self.s.tolist(),
            's_cluster': self.s_cluster.tolist(),
            'total_s': self.total_s,
            'kmeans': {
                'centers': self.kmeans.centers.tolist(),
                'assignment': self.kmeans.assignment.tolist(),
                'cost': self.kmeans.cost,
            },
            'summaries': {'b': b.tolist(), 'a': a.tolist(), 'A': total_a},
            's_i': {str(i): v.tolist() for i, v in sorted(self.s_i.items())},
            's_i_cluster': {str(i): v.tolist() for i, v in sorted(self.s_i_cluster.items())},
            'opt_i': {str(i): v for i, v in sorted(self.opt_i.items())},
        }


def entity_sensitivities(data: TimeSeriesDataset, k: int, bounds: ModelBounds, seed: int,
                         restarts: int = DEFAULT_RESTARTS) -> SensitivityProfile:
    """Entity part of the profile: s and s^c from the k-means reduction"""
    b, a, total_a = entity_summaries(data)
    result = kmeans_entities(b, k, restarts=restarts, seed=seed)

    sizes = result.cluster_sizes()
    s_cluster = 1.0 / sizes[result.assignment]

    dist = np.sum((b - result.centers[result.assignment]) ** 2, axis=1)
    denominator = result.cost + total_a
    dist_term = 4.0 * dist / denominator if denominator > 0.0 else np.zeros(data.N)

    scale = 4.0 * bounds.d_ratio / bounds.lambda_param
    s = np.minimum(1.0, scale * (dist_term + 3.0 * s_cluster))

    logger.info(f"Entity sensitivities: N={data.N}, k={k}, total {s.sum():.6g}, k-means cost {result.cost:.6g}")
    return SensitivityProfile(s=s, s_cluster=s_cluster, kmeans=result, summaries=(b, a, total_a))


def time_sensitivities(entity: EntitySeries, b_i: np.ndarray,
                       bounds: ModelBounds) -> Tuple[np.ndarray, np.ndarray, float]:
    """(s_i, s_i^c, OPT_i^(O)) for one entity"""
    opt_i = one_means_cost(entity, b_i)
    diff = entity.observations - np.asarray(b_i, dtype=np.float64)
    dist = np.sum(diff * diff, axis=1)

    s_i_c = np.full(entity.T, 6.0 / entity.T)
    if opt_i > 0.0:
        s_i_c += 2.0 * dist / opt_i

    lagged = s_i_c.copy()
    lagged[1:] += s_i_c[:-1]
    s_i = np.minimum(1.0, 4.0 * bounds.d_ratio / bounds.lambda_param * lagged)
    return s_i, s_i_c, opt_i
