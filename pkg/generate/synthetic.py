"""
Synthetic GMM-AR(1) panels

Parameters are drawn as: alpha uniform on the simplex, mu_l ~ N(0, I_d),
Sigma_l = (A A')^-1 with A uniform on [0, 1]^(d x d), and the diagonal of
Lambda_l uniform on [0, 1 - sqrt(lambda)]. Each entity draws a label from
alpha and follows e_it = Lambda e_i,t-1 + N(0, Sigma), x_it = mu + e_it.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from model.types import Component, EntitySeries, MixtureParams, TimeSeriesDataset
from utils.config import config
from utils.parallel import parallel_map
from utils.rng import check_seed, stream

logger = logging.getLogger(__name__)

MAX_SIGMA_DRAWS = 100
SINGULAR_TOL = 1e-10
INIT_MODES = ('stationary', 'zero')


@dataclass(frozen=True)
class GenConfig:
    """Shape, model constants and seed of one synthetic panel"""
    n_entities: int
    series_len: int
    d: int = 2
    k: int = 3
    lambda_param: float = 0.01
    seed: int = 0
    init: str = 'stationary'

    def __post_init__(self):
        for name in ('n_entities', 'series_len', 'd', 'k'):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 < self.lambda_param < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lambda_param}")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}, got '{self.init}'")
        check_seed(self.seed)

    @classmethod
    def from_preset(cls, name: str, seed: int, **overrides) -> 'GenConfig':
        """Named shape from the configuration (synthetic1, synthetic2, desk)"""
        values = config.get_preset(name)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(seed=seed, **values)


@dataclass
class GroundTruth:
    """Generating parameters and the planted label of every entity"""
    params: MixtureParams
    labels: np.ndarray


def _draw_sigma(d: int, rng: np.random.Generator) -> np.ndarray:
    for attempt in range(MAX_SIGMA_DRAWS):
        a = rng.uniform(0.0, 1.0, size=(d, d))
        gram = a @ a.T
        if np.linalg.eigvalsh(gram)[0] > SINGULAR_TOL:
            sigma = np.linalg.inv(gram)
            return (sigma + sigma.T) / 2.0
        logger.debug(f"Redrawing singular A A' (attempt {attempt + 1})")
    logger.warning(f"No full-rank A after {MAX_SIGMA_DRAWS} draws; falling back to A = I")
    return np.eye(d)


def draw_params(gen: GenConfig) -> MixtureParams:
    """Random admissible mixture parameters for the configured d, k and lambda"""
    rng = stream(gen.seed, 'params')
    alpha = rng.dirichlet(np.ones(gen.k))
    ar_max = 1.0 - np.sqrt(gen.lambda_param)
    components = []
    for _ in range(gen.k):
        mu = rng.standard_normal(gen.d)
        sigma = _draw_sigma(gen.d, rng)
        ar = rng.uniform(0.0, ar_max, size=gen.d)
        components.append(Component(mu=mu, sigma=sigma, ar=ar))
    return MixtureParams(alpha=alpha / alpha.sum(), components=tuple(components))


def simulate_entity(entity_id: int, comp: Component, series_len: int, seed: int,
                    init: str = 'stationary') -> EntitySeries:
    """One AR(1) series x_t = mu + e_t from its own keyed stream"""
    rng = stream(seed, 'entity', entity_id)
    d = comp.d
    noise = rng.standard_normal((series_len + 1, d)) @ comp.chol.T
    if init == 'stationary':
        # diagonal approximation of the stationary marginal
        scale = np.sqrt(np.diag(comp.sigma) / (1.0 - comp.ar ** 2))
        e = scale * rng.standard_normal(d)
    else:
        e = np.zeros(d)
    x = np.empty((series_len, d))
    for t in range(series_len):
        e = comp.ar * e + noise[t + 1]
        x[t] = comp.mu + e
    return EntitySeries(entity_id, x)


def generate(gen: GenConfig, params: Optional[MixtureParams] = None,
             threads: int = 1) -> Tuple[TimeSeriesDataset, GroundTruth]:
    """Draw (or take) parameters, labels and every entity's series"""
    if params is None:
        params = draw_params(gen)
    elif params.d != gen.d or params.k != gen.k:
        raise ValueError(f"Parameters have d={params.d}, k={params.k}; config has d={gen.d}, k={gen.k}")

    labels = stream(gen.seed, 'labels').choice(gen.k, size=gen.n_entities, p=params.alpha)
    entities = parallel_map(
        lambda i: simulate_entity(i, params.components[labels[i]], gen.series_len, gen.seed, gen.init),
        range(gen.n_entities),
        threads,
    )
    data = TimeSeriesDataset(tuple(entities), gen.d)
    logger.info(f"Generated N={data.N}, T={gen.series_len}, d={gen.d}, k={gen.k} "
                f"(cluster sizes {np.bincount(labels, minlength=gen.k).tolist()})")
    return data, GroundTruth(params=params, labels=labels)
