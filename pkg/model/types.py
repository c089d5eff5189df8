"""
Domain types for GMM time-series clustering

A dataset is a panel of N entities, each observed for T_i periods in d
features. A mixture has k components, each a Gaussian mean, a covariance and
a diagonal AR(1) autocorrelation vector.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from utils.errors import SingularMatrixError


SYMMETRY_TOL = 1e-10
SIMPLEX_TOL = 1e-12


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class EntitySeries:
    """One entity: a T_i x d observation matrix, row t-1 holds x_it"""
    id: int
    observations: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=np.float64)
        if obs.ndim == 1:
            obs = obs[:, None]
        if obs.ndim != 2 or obs.shape[0] < 1 or obs.shape[1] < 1:
            raise ValueError(f"Entity {self.id}: observations must be a non-empty T x d matrix, got shape {obs.shape}")
        if not np.all(np.isfinite(obs)):
            raise ValueError(f"Entity {self.id}: observations contain non-finite values")
        object.__setattr__(self, 'id', int(self.id))
        object.__setattr__(self, 'observations', _frozen(obs))

    @property
    def T(self) -> int:
        return self.observations.shape[0]

    @property
    def d(self) -> int:
        return self.observations.shape[1]


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """A panel of entities sharing the feature dimension d"""
    entities: Tuple[EntitySeries, ...]
    d: int

    def __post_init__(self):
        entities = tuple(self.entities)
        if not entities:
            raise ValueError("Dataset must contain at least one entity")
        ids = [e.id for e in entities]
        if sorted(ids) != list(range(len(entities))):
            raise ValueError("Entity ids must be unique and dense in [0, N)")
        for entity in entities:
            if entity.d != self.d:
                raise ValueError(f"Entity {entity.id} has dimension {entity.d}, expected {self.d}")
        object.__setattr__(self, 'entities', tuple(sorted(entities, key=lambda e: e.id)))

    @classmethod
    def from_arrays(cls, arrays: Iterable[np.ndarray]) -> 'TimeSeriesDataset':
        """Build a dataset from per-entity T_i x d arrays, ids in order"""
        entities = tuple(EntitySeries(i, a) for i, a in enumerate(arrays))
        if not entities:
            raise ValueError("Dataset must contain at least one entity")
        return cls(entities, entities[0].d)

    @property
    def N(self) -> int:
        return len(self.entities)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([e.T for e in self.entities], dtype=np.int64)

    @property
    def total_pairs(self) -> int:
        """|P_X|, the number of entity-time pairs"""
        return int(self.lengths.sum())

    def __getitem__(self, entity_id: int) -> EntitySeries:
        return self.entities[entity_id]

    def __iter__(self):
        return iter(self.entities)

    def __len__(self) -> int:
        return self.N


@dataclass(frozen=True)
class ModelBounds:
    """Covariance condition bound D and AR bound lambda"""
    d_ratio: float = 1.0
    lambda_param: float = 0.01

    def __post_init__(self):
        if not self.d_ratio >= 1.0:
            raise ValueError(f"D must be >= 1, got {self.d_ratio}")
        if not 0.0 < self.lambda_param < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lambda_param}")

    @property
    def ar_max(self) -> float:
        """Largest admissible AR coefficient, 1 - sqrt(lambda)"""
        return 1.0 - math.sqrt(self.lambda_param)

    @classmethod
    def from_params(cls, params: 'MixtureParams', lambda_param: float) -> 'ModelBounds':
        """Smallest D satisfied by the given covariances"""
        eigs = [np.linalg.eigvalsh(c.sigma) for c in params.components]
        ratio = max(e[-1] for e in eigs) / min(e[0] for e in eigs)
        return cls(max(1.0, float(ratio)), lambda_param)


@dataclass(frozen=True, eq=False)
class Component:
    """Gaussian mean, SPD covariance and diagonal AR(1) coefficients"""
    mu: np.ndarray
    sigma: np.ndarray
    ar: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        ar = np.atleast_1d(np.asarray(self.ar, dtype=np.float64))
        d = mu.shape[0]
        if mu.ndim != 1 or sigma.shape != (d, d) or ar.shape != (d,):
            raise ValueError(f"Component shapes disagree: mu {mu.shape}, sigma {sigma.shape}, ar {ar.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma)) and np.all(np.isfinite(ar))):
            raise ValueError("Component parameters must be finite")
        if np.max(np.abs(sigma - sigma.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(sigma))):
            raise ValueError("Covariance matrix is not symmetric")
        # psi_i1 is only meaningful for AR coefficients strictly below one
        if np.any(ar < 0.0) or np.any(ar >= 1.0):
            raise ValueError(f"AR coefficients must lie in [0, 1), got {ar}")
        object.__setattr__(self, 'mu', _frozen(mu))
        object.__setattr__(self, 'sigma', _frozen((sigma + sigma.T) / 2.0))
        object.__setattr__(self, 'ar', _frozen(ar))

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @cached_property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of sigma, computed once per instance"""
        try:
            factor = linalg.cholesky(self.sigma, lower=True)
        except linalg.LinAlgError as e:
            raise SingularMatrixError(f"Covariance is not positive definite: {e}") from e
        diag = np.diag(factor)
        if np.min(diag) <= SYMMETRY_TOL * max(1.0, np.max(diag)):
            raise SingularMatrixError("Covariance is singular within tolerance")
        return factor

    @cached_property
    def log_det(self) -> float:
        """ln |sigma|"""
        return float(2.0 * np.sum(np.log(np.diag(self.chol))))

    def check(self, bounds: ModelBounds) -> None:
        """Raise ValueError unless the AR bound 1 - sqrt(lambda) holds"""
        if np.any(self.ar > bounds.ar_max + 1e-12):
            raise ValueError(f"AR coefficients {self.ar} exceed 1 - sqrt(lambda) = {bounds.ar_max:.6g}")
        _ = self.chol


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Mixture weights alpha on the simplex and k components"""
    alpha: np.ndarray
    components: Tuple[Component, ...]

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=np.float64))
        components = tuple(self.components)
        if len(components) < 1:
            raise ValueError("A mixture needs k >= 1 components")
        if alpha.shape != (len(components),):
            raise ValueError(f"alpha has shape {alpha.shape}, expected ({len(components)},)")
        if np.any(alpha < 0.0) or np.any(alpha > 1.0) or abs(alpha.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"alpha must lie on the probability simplex, got {alpha}")
        if len({c.d for c in components}) != 1:
            raise ValueError("All components must share the feature dimension")
        object.__setattr__(self, 'alpha', _frozen(alpha))
        object.__setattr__(self, 'components', components)

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return self.components[0].d

    def check(self, bounds: ModelBounds) -> None:
        """Raise ValueError unless every component satisfies the model bounds"""
        for component in self.components:
            component.check(bounds)
        eigs = [np.linalg.eigvalsh(c.sigma) for c in self.components]
        ratio = max(e[-1] for e in eigs) / min(e[0] for e in eigs)
        if ratio > bounds.d_ratio * (1.0 + 1e-9):
            raise ValueError(f"Covariance condition ratio {ratio:.6g} exceeds D = {bounds.d_ratio:.6g}")

    def permuted(self, order: Sequence[int]) -> 'MixtureParams':
        """Reorder components together with alpha"""
        return MixtureParams(self.alpha[list(order)], tuple(self.components[i] for i in order))


@dataclass
class Coreset:
    """Weighted entity-time pairs with entity weights w and time weights w^(i)

    Time indices are 1-based, as in t in [T_i].
    """
    entity_ids: Tuple[int, ...]
    entity_weights: Dict[int, float]
    time_indices: Dict[int, Tuple[int, ...]]
    time_weights: Dict[int, Dict[int, float]]
    method: str = 'crgmm'
    seed: Optional[int] = None
    m_entities: Optional[int] = None
    l_times: Optional[int] = None

    def __post_init__(self):
        self.entity_ids = tuple(sorted(int(i) for i in self.entity_ids))
        ids = set(self.entity_ids)
        if len(ids) != len(self.entity_ids):
            raise ValueError("Coreset entity ids must be unique")
        if set(self.entity_weights) != ids or set(self.time_indices) != ids or set(self.time_weights) != ids:
            raise ValueError("Coreset entity ids, weights and time indices must cover the same entities")
        for i in self.entity_ids:
            times = tuple(sorted(int(t) for t in self.time_indices[i]))
            if not times or len(set(times)) != len(times):
                raise ValueError(f"Entity {i}: time indices must be a non-empty set")
            if set(self.time_weights[i]) != set(times):
                raise ValueError(f"Entity {i}: time weights do not match time indices")
            self.time_indices[i] = times
            weights = [self.entity_weights[i], *self.time_weights[i].values()]
            if not all(math.isfinite(w) and w >= 0.0 for w in weights):
                raise ValueError(f"Entity {i}: weights must be finite and nonnegative")

    @classmethod
    def identity(cls, data: TimeSeriesDataset) -> 'Coreset':
        """Every pair of the dataset with unit weights"""
        ids = tuple(e.id for e in data)
        return cls(
            entity_ids=ids,
            entity_weights={i: 1.0 for i in ids},
            time_indices={e.id: tuple(range(1, e.T + 1)) for e in data},
            time_weights={e.id: {t: 1.0 for t in range(1, e.T + 1)} for e in data},
            method='identity',
        )

    @property
    def size(self) -> int:
        """Gamma, the number of distinct entity-time pairs"""
        return sum(len(self.time_indices[i]) for i in self.entity_ids)

    @property
    def total_entity_weight(self) -> float:
        return float(sum(self.entity_weights[i] for i in self.entity_ids))

    def times_array(self, entity_id: int) -> np.ndarray:
        """0-based row indices of J_{S,i}"""
        return np.asarray(self.time_indices[entity_id], dtype=np.int64) - 1

    def weights_array(self, entity_id: int) -> np.ndarray:
        """w^(i)(t) aligned with times_array"""
        weights = self.time_weights[entity_id]
        return np.array([weights[t] for t in self.time_indices[entity_id]], dtype=np.float64)

    def check(self, data: TimeSeriesDataset) -> None:
        """Raise IndexError on any entity or time index outside the dataset"""
        for i in self.entity_ids:
            if not 0 <= i < data.N:
                raise IndexError(f"Coreset entity {i} is not in the dataset (N = {data.N})")
            times = self.time_indices[i]
            if times[0] < 1 or times[-1] > data[i].T:
                raise IndexError(f"Coreset entity {i}: time indices must lie in [1, {data[i].T}]")
