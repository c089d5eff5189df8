"""
k-means reduction over entity means

Each entity is summarised by its mean b_i and offset a_i, so that
psi^(O)_i(mu) / T_i = ||b_i - mu||^2 + a_i. The k-means problem over the b_i
is solved with k-means++ seeding followed by Lloyd iterations.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from model.types import EntitySeries, TimeSeriesDataset
from utils.errors import NumericError
from utils.rng import stream

logger = logging.getLogger(__name__)

MAX_LLOYD_ITERS = 100
LLOYD_REL_TOL = 1e-6
DEFAULT_RESTARTS = 3
OFFSET_TOL = 1e-9


@dataclass
class KMeansResult:
    """Centers C*, assignment p(i) and cost of the best run"""
    centers: np.ndarray
    assignment: np.ndarray
    cost: float
    history: List[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def entity_summaries(data: TimeSeriesDataset) -> Tuple[np.ndarray, np.ndarray, float]:
    """(b, a, A): entity means, offsets a_i and their total"""
    b = np.empty((data.N, data.d))
    a = np.empty(data.N)
    for n, entity in enumerate(data.entities):
        x = entity.observations
        total = x.sum(axis=0)
        b[n] = total / entity.T
        a[n] = np.sum(x * x) / entity.T - np.dot(total, total) / entity.T ** 2
    a = clamp_offsets(a, b)
    return b, a, float(a.sum())


def clamp_offsets(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Zero the small negative a_i that cancellation leaves; larger negatives are an error"""
    tol = OFFSET_TOL * (1.0 + np.abs(b).sum(axis=1) ** 2)
    bad = np.flatnonzero(a < -tol)
    if bad.size:
        raise NumericError(f"Entity offsets a_i are negative beyond rounding at entities {bad.tolist()}")
    return np.where(a < 0.0, 0.0, a)


def one_means_cost(entity: EntitySeries, b_i: np.ndarray) -> float:
    """OPT_i^(O) = sum_t ||x_it - b_i||^2"""
    diff = entity.observations - np.asarray(b_i, dtype=np.float64)
    return float(np.sum(diff * diff))


def squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """n x k matrix of ||p - c||^2"""
    diff = points[:, None, :] - centers[None, :, :]
    return np.sum(diff * diff, axis=2)


def kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: D^2-weighted choice of each new center"""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = squared_distances(points, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total > 0.0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[j] = points[idx]
        closest = np.minimum(closest, squared_distances(points, centers[j:j + 1])[:, 0])
    return centers


def _assign(points: np.ndarray, centers: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    dist = squared_distances(points, centers)
    # argmin returns the first minimum, i.e. the lowest center index on ties
    assignment = np.argmin(dist, axis=1)
    return assignment, dist[np.arange(points.shape[0]), assignment]


def lloyd(points: np.ndarray, centers: np.ndarray) -> KMeansResult:
    """Lloyd iterations until relative improvement < 1e-6 or 100 iterations"""
    centers = centers.copy()
    k = centers.shape[0]
    assignment, point_cost = _assign(points, centers)
    cost = float(point_cost.sum())
    history = [cost]
    n_iter = 0
    for n_iter in range(1, MAX_LLOYD_ITERS + 1):
        for j in range(k):
            members = assignment == j
            if np.any(members):
                centers[j] = points[members].mean(axis=0)
            else:
                worst = int(np.argmax(point_cost))
                logger.debug(f"Empty cluster {j} reseeded at point {worst}")
                centers[j] = points[worst]
                point_cost[worst] = 0.0
        assignment, point_cost = _assign(points, centers)
        new_cost = float(point_cost.sum())
        history.append(new_cost)
        improvement = cost - new_cost
        cost = new_cost
        if improvement <= LLOYD_REL_TOL * cost or cost == 0.0:
            break
    return KMeansResult(centers=centers, assignment=assignment, cost=cost, history=history, n_iter=n_iter)


def kmeans_entities(b: np.ndarray, k: int, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> KMeansResult:
    """Best of `restarts` runs of k-means++ seeding plus Lloyd"""
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    n = b.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, N] = [1, {n}], got {k}")
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")

    best = None
    for run in range(restarts):
        rng = stream(seed, 'kmeans', run)
        result = lloyd(b, kmeans_plusplus(b, k, rng))
        if best is None or result.cost < best.cost:
            best = result
    logger.debug(f"k-means over {n} points, k={k}: cost {best.cost:.6g} after {best.n_iter} iterations")
    return best
