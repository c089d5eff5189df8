"""
Baseline coresets at a matched number of entity-time pairs

Uni draws Gamma distinct pairs uniformly; LFKF pools every observation as a
static point and samples pairs by static k-means sensitivities, then maps the
result onto the two-level weight format.
"""

import logging
from collections import defaultdict
from typing import Dict, Tuple

import numpy as np

from cluster.kmeans import DEFAULT_RESTARTS, kmeans_entities
from coreset.sampling import importance_sample
from model.types import Coreset, TimeSeriesDataset
from utils.rng import stream

logger = logging.getLogger(__name__)


def _pair_of(data: TimeSeriesDataset, flat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Flat pair indices -> (entity ids, 1-based times)"""
    offsets = np.concatenate([[0], np.cumsum(data.lengths)])
    entity = np.searchsorted(offsets, flat, side='right') - 1
    return entity, flat - offsets[entity] + 1


def uniform_baseline(data: TimeSeriesDataset, gamma: int, seed: int) -> Coreset:
    """Gamma uniform pairs, w(i) = N / |I_S|, w^(i)(t) = T_i / |J_{S,i}|"""
    if gamma < 1:
        raise ValueError(f"Gamma must be >= 1, got {gamma}")
    rng = stream(seed, 'uniform')
    size = min(gamma, data.total_pairs)
    flat = np.sort(rng.choice(data.total_pairs, size=size, replace=False))
    entities, times = _pair_of(data, flat)

    grouped = defaultdict(list)
    for i, t in zip(entities.tolist(), times.tolist()):
        grouped[i].append(t)

    entity_weight = data.N / len(grouped)
    coreset = Coreset(
        entity_ids=tuple(grouped),
        entity_weights={i: entity_weight for i in grouped},
        time_indices={i: tuple(ts) for i, ts in grouped.items()},
        time_weights={i: {t: data[i].T / len(ts) for t in ts} for i, ts in grouped.items()},
        method='uni',
        seed=seed,
    )
    logger.info(f"Uni coreset: {len(coreset.entity_ids)} entities, {coreset.size} pairs")
    return coreset


def pooled_sensitivities(data: TimeSeriesDataset, k: int, seed: int,
                         restarts: int = DEFAULT_RESTARTS) -> np.ndarray:
    """Static sensitivities 4 dist^2 / cost + 3 / |cluster| of every pooled observation"""
    points = np.vstack([e.observations for e in data.entities])
    result = kmeans_entities(points, min(k, points.shape[0]), restarts=restarts, seed=seed)
    dist = np.sum((points - result.centers[result.assignment]) ** 2, axis=1)
    cluster_term = 3.0 / result.cluster_sizes()[result.assignment]
    if result.cost > 0.0:
        return 4.0 * dist / result.cost + cluster_term
    return cluster_term


def lfkf_baseline(data: TimeSeriesDataset, gamma: int, k: int, seed: int,
                  restarts: int = DEFAULT_RESTARTS) -> Coreset:
    """Gamma pairs by static importance sampling, mapped to two-level weights

    A sampled pair with importance weight u carries w^(i)(t) = u T_i / (N w(i))
    under the entity weight w(i) = N / |I_S|.
    """
    if gamma < 1:
        raise ValueError(f"Gamma must be >= 1, got {gamma}")
    sensitivities = pooled_sensitivities(data, k, seed, restarts)
    drawn = importance_sample(sensitivities, gamma, stream(seed, 'lfkf'))

    flat = np.fromiter(drawn, dtype=np.int64)
    entities, times = _pair_of(data, flat)
    grouped: Dict[int, Dict[int, float]] = defaultdict(dict)
    for f, i, t in zip(flat.tolist(), entities.tolist(), times.tolist()):
        grouped[i][t] = drawn[f]

    entity_weight = data.N / len(grouped)
    scale = {i: data[i].T / (data.N * entity_weight) for i in grouped}
    coreset = Coreset(
        entity_ids=tuple(grouped),
        entity_weights={i: entity_weight for i in grouped},
        time_indices={i: tuple(ws) for i, ws in grouped.items()},
        time_weights={i: {t: u * scale[i] for t, u in ws.items()} for i, ws in grouped.items()},
        method='lfkf',
        seed=seed,
    )
    logger.info(f"LFKF coreset: {len(coreset.entity_ids)} entities, {coreset.size} pairs")
    return coreset
