"""
Weighted generalized EM for GMM time-series clustering

Minimises f'_S(alpha'(theta), theta) + phi(alpha, theta) over a weighted
coreset, or f(alpha, theta) on the full dataset (the identity coreset gives the
same objective). Each iteration computes responsibilities in log space, then
updates per component mu (exact weighted normal equations of the AR-transformed
quadratic), Lambda (per-dimension weighted AR(1) regression, clipped to
[0, 1 - sqrt(lambda)]) and Sigma (weighted residual covariance with an
eigenvalue floor), and finally alpha. A step is kept only if the objective does
not rise by more than tol; otherwise it is halved toward the previous iterate.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.special import logsumexp, softmax

from cluster.kmeans import kmeans_entities
from model.likelihood import full_objective, log_mixture, log_normalisers, normalised_alpha, psi_at, safe_log
from model.types import Component, Coreset, EntitySeries, MixtureParams, ModelBounds, TimeSeriesDataset
from utils.errors import NumericError
from utils.rng import check_seed, stream

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-8
INIT_RIDGE = 1e-6
EMPTY_MASS = 1e-12


@dataclass(frozen=True)
class FitConfig:
    """Settings of one EM fit"""
    k: int
    max_iters: int = 100
    tol: float = 1e-6
    n_init: int = 1
    seed: int = 0
    bounds: ModelBounds = field(default_factory=ModelBounds)
    fix_sigma: bool = False
    fix_ar: bool = False
    max_halvings: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.tol > 0.0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1 or self.n_init < 1:
            raise ValueError(f"max_iters and n_init must be >= 1, got {self.max_iters}, {self.n_init}")
        check_seed(self.seed)


@dataclass
class FitResult:
    """Fitted parameters, reporting objective and per-iteration trace"""
    params: MixtureParams
    objective: float
    trace: List[float]
    wall_time: float
    train_objective: float
    n_iter: int
    converged: bool


@dataclass
class _Batch:
    """Training set as parallel per-entity lists"""
    entities: List[EntitySeries]
    weights: np.ndarray
    rows: List[np.ndarray]
    time_weights: List[np.ndarray]
    n_total: int

    @classmethod
    def build(cls, data: TimeSeriesDataset, coreset: Optional[Coreset]) -> '_Batch':
        if coreset is None:
            coreset = Coreset.identity(data)
        coreset.check(data)
        ids = coreset.entity_ids
        return cls(
            entities=[data[i] for i in ids],
            weights=np.array([coreset.entity_weights[i] for i in ids]),
            rows=[coreset.times_array(i) for i in ids],
            time_weights=[coreset.weights_array(i) for i in ids],
            n_total=data.N,
        )

    def psi(self, params: MixtureParams) -> np.ndarray:
        """n x k matrix of coreset-weighted psi sums"""
        return np.array([
            [np.sum(tw * psi_at(e.observations, rows, comp)) for comp in params.components]
            for e, rows, tw in zip(self.entities, self.rows, self.time_weights)
        ])

    @property
    def lengths(self) -> np.ndarray:
        return np.array([e.T for e in self.entities], dtype=np.float64)


def training_objective(batch: _Batch, params: MixtureParams, psi: Optional[np.ndarray] = None) -> float:
    """f'_S(alpha'(theta), theta) + phi(alpha, theta)"""
    if psi is None:
        psi = batch.psi(params)
    alpha_prime, log_z = normalised_alpha(params)
    log_coef = safe_log(alpha_prime)
    values = np.array([-log_mixture(log_coef, psi[n], e.T) for n, e in enumerate(batch.entities)])
    value = float(np.sum(batch.weights * values)) - batch.n_total * log_z
    if not np.isfinite(value):
        raise NumericError(f"Training objective is not finite ({value})")
    return value


def _sample_means(batch: _Batch) -> np.ndarray:
    return np.array([
        np.sum(tw[:, None] * e.observations[rows], axis=0) / np.sum(tw)
        for e, rows, tw in zip(batch.entities, batch.rows, batch.time_weights)
    ])


def _pooled_covariance(batch: _Batch, means: np.ndarray) -> np.ndarray:
    d = means.shape[1]
    scatter = np.zeros((d, d))
    count = 0.0
    for e, rows, tw, b in zip(batch.entities, batch.rows, batch.time_weights, means):
        diff = e.observations[rows] - b
        scatter += (tw[:, None] * diff).T @ diff
        count += np.sum(tw)
    return scatter / count + INIT_RIDGE * np.eye(d)


def _fill_centers(centers: np.ndarray, k: int, sigma: np.ndarray, seed: int) -> np.ndarray:
    """Cycle the available centers up to k, jittered by 0.1 standard deviations"""
    n, d = centers.shape
    rng = stream(seed, 'em-init-fill')
    extra = centers[np.arange(k - n) % n] + 0.1 * np.sqrt(np.diag(sigma)) * rng.standard_normal((k - n, d))
    return np.vstack([centers, extra])


def _initial_params(batch: _Batch, k: int, seed: int) -> MixtureParams:
    means = _sample_means(batch)
    sigma = _pooled_covariance(batch, means)
    points = means
    if k > means.shape[0]:
        points = np.vstack([e.observations[rows] for e, rows in zip(batch.entities, batch.rows)])
    centers = kmeans_entities(points, min(k, points.shape[0]), restarts=1, seed=seed).centers
    if centers.shape[0] < k:
        logger.warning(f"Only {centers.shape[0]} training pairs for k={k}; repeating jittered centers")
        centers = _fill_centers(centers, k, sigma, seed)
    d = means.shape[1]
    components = tuple(Component(mu=c, sigma=sigma, ar=np.zeros(d)) for c in centers)
    return MixtureParams(alpha=np.full(k, 1.0 / k), components=components)


def init_params(data: TimeSeriesDataset, k: int, seed: int, bounds: ModelBounds) -> MixtureParams:
    """k-means means over the b_i, pooled within-entity covariance + 1e-6 I, zero AR, uniform alpha"""
    params = _initial_params(_Batch.build(data, None), k, seed)
    params.check(ModelBounds(float('inf'), bounds.lambda_param))
    return params


def _responsibilities(params: MixtureParams, psi: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    log_coef = safe_log(params.alpha) + log_normalisers(params)
    scores = log_coef[None, :] - psi / (2.0 * lengths[:, None])
    return softmax(scores, axis=1)


def _floor_eigen(sigma: np.ndarray) -> np.ndarray:
    sigma = (sigma + sigma.T) / 2.0
    eigval, eigvec = np.linalg.eigh(sigma)
    eigval = np.maximum(eigval, EIGEN_FLOOR)
    return (eigvec * eigval) @ eigvec.T


def _update_component(batch: _Batch, comp: Component, scale: np.ndarray,
                      config: FitConfig) -> Component:
    """One coordinate pass mu -> Lambda -> Sigma with per-entity weights scale_n = w_n r_nl / T_n"""
    d = comp.d
    precision = linalg.cho_solve((comp.chol, True), np.eye(d))
    ar = comp.ar

    # mu: weighted normal equations of sum_t c_t psi_it in mu
    lhs = np.zeros((d, d))
    rhs = np.zeros(d)
    shrink = np.diag(1.0 - ar)
    ar_mat = np.diag(ar)
    lag_form = shrink @ precision @ shrink
    first_form = precision - ar_mat @ precision @ ar_mat
    for e, rows, tw, c in zip(batch.entities, batch.rows, batch.time_weights, scale):
        if c <= 0.0:
            continue
        x = e.observations
        weights = c * tw
        first = rows == 0
        later = ~first
        if np.any(later):
            y = x[rows[later]] - ar * x[rows[later] - 1]
            lhs += np.sum(weights[later]) * lag_form
            rhs += shrink @ precision @ (weights[later] @ y)
        if np.any(first):
            w0 = np.sum(weights[first])
            lhs += w0 * first_form
            rhs += w0 * first_form @ x[0]
    try:
        mu = linalg.solve(lhs, rhs, assume_a='sym')
    except (linalg.LinAlgError, ValueError):
        logger.warning("Mean update system is singular; keeping the previous mean")
        mu = comp.mu.copy()

    # Lambda: per-dimension weighted AR(1) coefficient on residuals about mu
    if not config.fix_ar:
        num = np.zeros(d)
        den = np.zeros(d)
        for e, rows, tw, c in zip(batch.entities, batch.rows, batch.time_weights, scale):
            later = rows > 0
            if c <= 0.0 or not np.any(later):
                continue
            u = e.observations[rows[later]] - mu
            prev = e.observations[rows[later] - 1] - mu
            weights = (c * tw[later])[:, None]
            num += np.sum(weights * u * prev, axis=0)
            den += np.sum(weights * prev * prev, axis=0)
        ar = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
        ar = np.clip(ar, 0.0, config.bounds.ar_max)

    # Sigma: weighted residual covariance, first period as u u' - (Lambda u)(Lambda u)'
    sigma = comp.sigma
    if not config.fix_sigma:
        scatter = np.zeros((d, d))
        mass = 0.0
        for e, rows, tw, c in zip(batch.entities, batch.rows, batch.time_weights, scale):
            if c <= 0.0:
                continue
            x = e.observations
            u = x[rows] - mu
            prev = x[np.maximum(rows - 1, 0)] - mu
            first = rows == 0
            resid = np.where(first[:, None], u, u - ar * prev)
            weights = c * tw
            scatter += (weights[:, None] * resid).T @ resid
            if np.any(first):
                shifted = ar * u[first]
                scatter -= (weights[first][:, None] * shifted).T @ shifted
            mass += c * e.T
        if mass > 0.0:
            sigma = _floor_eigen(scatter / mass)

    return Component(mu=mu, sigma=sigma, ar=ar)


def _blend(old: MixtureParams, new: MixtureParams, frac: float) -> MixtureParams:
    """old + frac (new - old), componentwise"""
    alpha = (1.0 - frac) * old.alpha + frac * new.alpha
    components = tuple(
        Component(
            mu=(1.0 - frac) * a.mu + frac * b.mu,
            sigma=(1.0 - frac) * a.sigma + frac * b.sigma,
            ar=(1.0 - frac) * a.ar + frac * b.ar,
        )
        for a, b in zip(old.components, new.components)
    )
    return MixtureParams(alpha=alpha / alpha.sum(), components=components)


def _m_step(batch: _Batch, params: MixtureParams, psi: np.ndarray, config: FitConfig,
            fallback_sigma: np.ndarray) -> MixtureParams:
    lengths = batch.lengths
    resp = _responsibilities(params, psi, lengths)
    mass = batch.weights @ resp
    alpha = mass / np.sum(batch.weights)

    components = []
    for l, comp in enumerate(params.components):
        if mass[l] < EMPTY_MASS:
            entity_nll = -np.array([logsumexp(safe_log(params.alpha) + log_normalisers(params)
                                              - psi[n] / (2.0 * lengths[n])) for n in range(len(lengths))])
            worst = batch.entities[int(np.argmax(entity_nll))]
            logger.warning(f"Component {l} is empty; reinitialising at the mean of entity {worst.id}")
            components.append(Component(mu=worst.observations.mean(axis=0), sigma=fallback_sigma,
                                        ar=np.zeros(comp.d)))
            alpha[l] = 1.0 / params.k
            continue
        scale = batch.weights * resp[:, l] / lengths
        components.append(_update_component(batch, comp, scale, config))
    return MixtureParams(alpha=alpha / alpha.sum(), components=tuple(components))


def _run(batch: _Batch, start: MixtureParams, config: FitConfig) -> Tuple[MixtureParams, float, List[float], int, bool]:
    params = start
    fallback_sigma = start.components[0].sigma
    psi = batch.psi(params)
    value = training_objective(batch, params, psi)
    trace = [value]
    converged = False
    n_iter = 0
    for n_iter in range(1, config.max_iters + 1):
        proposal = _m_step(batch, params, psi, config, fallback_sigma)
        allowance = config.tol * (1.0 + abs(value))
        accepted = None
        frac = 1.0
        for _ in range(config.max_halvings + 1):
            candidate = proposal if frac == 1.0 else _blend(params, proposal, frac)
            candidate_psi = batch.psi(candidate)
            candidate_value = training_objective(batch, candidate, candidate_psi)
            if candidate_value <= value + allowance:
                accepted = (candidate, candidate_psi, candidate_value)
                break
            frac /= 2.0
        if accepted is None:
            logger.warning(f"EM step {n_iter} rejected after {config.max_halvings} halvings; stopping")
            break
        if frac < 1.0:
            logger.debug(f"EM step {n_iter} accepted after damping to {frac:g}")
        params, psi, new_value = accepted
        improvement = (value - new_value) / (1.0 + abs(value))
        value = new_value
        trace.append(value)
        if improvement < config.tol:
            converged = True
            break
    return params, value, trace, n_iter, converged


def fit(data: TimeSeriesDataset, coreset: Optional[Coreset] = None, config: Optional[FitConfig] = None,
        init: Optional[MixtureParams] = None) -> FitResult:
    """Fit on the full data (coreset=None) or a weighted coreset; best of n_init restarts

    The reported objective is f evaluated on the full dataset at the fitted parameters.
    """
    if config is None:
        raise ValueError("A FitConfig is required")
    started = time.perf_counter()
    batch = _Batch.build(data, coreset)

    best = None
    for restart in range(config.n_init):
        if init is not None and restart == 0:
            start = init
        else:
            seed = int(stream(config.seed, 'em-init', restart).integers(0, 2 ** 63))
            start = _initial_params(batch, config.k, seed)
        params, value, trace, n_iter, converged = _run(batch, start, config)
        logger.info(f"EM restart {restart}: objective {value:.6f} after {n_iter} iterations"
                    f"{' (converged)' if converged else ''}")
        if best is None or value < best[1]:
            best = (params, value, trace, n_iter, converged)

    params, value, trace, n_iter, converged = best
    wall_time = time.perf_counter() - started
    objective = full_objective(data, params)
    return FitResult(params=params, objective=objective, trace=trace, wall_time=wall_time,
                     train_objective=value, n_iter=n_iter, converged=converged)
