"""
Two-stage coreset construction

Entities are drawn i.i.d. with probability proportional to s(i) and weighted
sum(s) / (M s(i)); for each drawn entity, time periods are drawn i.i.d. with
probability proportional to s_i(t) and weighted sum(s_i) / (L s_i(t)).
Repeated draws are merged by summing their weights.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from cluster.kmeans import DEFAULT_RESTARTS
from coreset.sensitivity import SensitivityProfile, entity_sensitivities, time_sensitivities
from model.types import Coreset, EntitySeries, ModelBounds, TimeSeriesDataset
from utils.parallel import parallel_map
from utils.rng import check_seed, stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplerConfig:
    """Sizes M and L, model bounds and the k-means settings of one construction"""
    m_entities: int
    l_times: int
    bounds: ModelBounds
    k: int
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0
    full_coverage: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.m_entities < 1 or self.l_times < 1:
            raise ValueError(f"M and L must be >= 1, got M={self.m_entities}, L={self.l_times}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        check_seed(self.seed)


def importance_sample(scores: np.ndarray, size: int, rng: np.random.Generator) -> Dict[int, float]:
    """size i.i.d. draws proportional to scores, weight sum(scores) / (size * score) per draw

    Returns {index: merged weight}, keys ascending.
    """
    scores = np.asarray(scores, dtype=np.float64)
    total = scores.sum()
    draws = rng.choice(scores.shape[0], size=size, replace=True, p=scores / total)
    counts = np.bincount(draws, minlength=scores.shape[0])
    picked = np.flatnonzero(counts)
    weights = counts[picked] * (total / (size * scores[picked]))
    return {int(i): float(w) for i, w in zip(picked, weights)}


def sample_entities(profile: SensitivityProfile, m_entities: int, seed: int) -> Dict[int, float]:
    """(I_S, w) as {entity id: w(i)}"""
    if m_entities < 1:
        raise ValueError(f"M must be >= 1, got {m_entities}")
    return importance_sample(profile.s, m_entities, stream(seed, 'entities'))


def sample_times(entity: EntitySeries, s_i: np.ndarray, l_times: int, seed: int) -> Dict[int, float]:
    """(J_{S,i}, w^(i)) as {1-based t: w^(i)(t)}"""
    if l_times < 1:
        raise ValueError(f"L must be >= 1, got {l_times}")
    drawn = importance_sample(s_i, l_times, stream(seed, 'times', entity.id))
    return {row + 1: w for row, w in drawn.items()}


def theoretical_sizes(epsilon: float, k: int, d: int, bounds: ModelBounds,
                      c_entity: float = 1.0, c_time: float = 1.0) -> Tuple[int, int]:
    """(M, L) from the size bounds with user-supplied leading constants"""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if c_entity <= 0.0 or c_time <= 0.0:
        raise ValueError(f"Size constants must be positive, got c_entity={c_entity}, c_time={c_time}")
    if k < 1 or d < 1:
        raise ValueError(f"k and d must be >= 1, got k={k}, d={d}")
    D, lam = bounds.d_ratio, bounds.lambda_param
    m = c_entity * k * D * (k ** 4 * d ** 4 + k ** 3 * d ** 8) * math.log(k / lam) / (lam * epsilon ** 2)
    l = c_time * D * d ** 8 * math.log(1.0 / lam) / (lam * epsilon ** 2)
    return int(math.ceil(m)), int(math.ceil(l))


def build_coreset(data: TimeSeriesDataset, config: SamplerConfig) -> Tuple[Coreset, SensitivityProfile, float]:
    """Run both sampling stages; returns (coreset, profile, construction seconds)"""
    started = time.perf_counter()
    profile = entity_sensitivities(data, config.k, config.bounds, config.seed, config.restarts)

    if config.full_coverage:
        coreset = Coreset.identity(data)
        coreset.method = 'crgmm'
        coreset.seed = config.seed
        return coreset, profile, time.perf_counter() - started

    entity_weights = sample_entities(profile, config.m_entities, config.seed)
    b = profile.summaries[0]

    def time_stage(entity_id: int):
        entity = data[entity_id]
        s_i, s_i_c, opt_i = time_sensitivities(entity, b[entity_id], config.bounds)
        return s_i, s_i_c, opt_i, sample_times(entity, s_i, config.l_times, config.seed)

    staged = parallel_map(time_stage, list(entity_weights), config.threads)

    time_weights = {}
    for entity_id, (s_i, s_i_c, opt_i, weights) in zip(entity_weights, staged):
        profile.s_i[entity_id] = s_i
        profile.s_i_cluster[entity_id] = s_i_c
        profile.opt_i[entity_id] = opt_i
        time_weights[entity_id] = weights

    coreset = Coreset(
        entity_ids=tuple(entity_weights),
        entity_weights=entity_weights,
        time_indices={i: tuple(w) for i, w in time_weights.items()},
        time_weights=time_weights,
        method='crgmm',
        seed=config.seed,
        m_entities=config.m_entities,
        l_times=config.l_times,
    )
    elapsed = time.perf_counter() - started
    logger.info(f"CRGMM coreset: {len(coreset.entity_ids)} entities, {coreset.size} pairs in {elapsed:.3f}s")
    return coreset, profile, elapsed
