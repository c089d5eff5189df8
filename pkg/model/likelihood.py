"""
Likelihood objectives for GMM time-series clustering

psi_it is the Mahalanobis cost of one AR(1) innovation; psi_i sums it over an
entity's series. The objectives built on top of it are

    f_i   = -ln sum_l alpha_l exp(-psi_i^(l) / (2 T_i)) / ((2 pi)^(d/2) |Sigma_l|^(1/2))
    f     = sum_i f_i
    f'    = -sum_i ln sum_l alpha_l exp(-psi_i^(l) / (2 T_i))
    phi   = -N ln Z,   Z = sum_l alpha_l / ((2 pi)^(d/2) |Sigma_l|^(1/2))

so that f(alpha, theta) = f'(alpha'(theta), theta) + phi(alpha, theta) with
alpha'_l proportional to the Gaussian normalising coefficients. All mixture
logs go through a max-shifted log-sum-exp.
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from model.types import Component, Coreset, EntitySeries, MixtureParams, TimeSeriesDataset
from utils.errors import NumericError
from utils.parallel import parallel_map

LOG_2PI = math.log(2.0 * math.pi)


def psi_at(x: np.ndarray, rows: np.ndarray, comp: Component) -> np.ndarray:
    """psi_it for the given 0-based rows of a T x d series

    Row 0 uses the first-period form (x_1 - mu)' S^-1 (x_1 - mu) minus the
    same form of Lambda (x_1 - mu); later rows use the AR(1) innovation
    (x_t - mu) - Lambda (x_{t-1} - mu).
    """
    rows = np.asarray(rows, dtype=np.int64)
    u = x[rows] - comp.mu
    first = rows == 0
    prev = x[np.maximum(rows - 1, 0)] - comp.mu
    resid = np.where(first[:, None], u, u - comp.ar * prev)
    z = linalg.solve_triangular(comp.chol, resid.T, lower=True, check_finite=False)
    terms = np.sum(z * z, axis=0)
    if np.any(first):
        shifted = comp.ar * u[first]
        zs = linalg.solve_triangular(comp.chol, shifted.T, lower=True, check_finite=False)
        terms[first] -= np.sum(zs * zs, axis=0)
    return terms


def psi_terms(entity: EntitySeries, comp: Component) -> np.ndarray:
    """psi_it for every t in [T_i]"""
    return psi_at(entity.observations, np.arange(entity.T), comp)


def psi_it(entity: EntitySeries, t: int, comp: Component) -> float:
    """psi_it for one 1-based time index"""
    if not 1 <= t <= entity.T:
        raise IndexError(f"Time index {t} outside [1, {entity.T}] for entity {entity.id}")
    return float(psi_at(entity.observations, np.array([t - 1]), comp)[0])


def psi_i(entity: EntitySeries, comp: Component) -> float:
    """psi_i = sum_t psi_it"""
    return float(np.sum(psi_terms(entity, comp)))


def psi_o(entity: EntitySeries, mu: np.ndarray) -> float:
    """Identity-covariance, zero-AR cost sum_t ||x_it - mu||^2"""
    diff = entity.observations - np.asarray(mu, dtype=np.float64)
    return float(np.sum(diff * diff))


def weighted_psi_sums(entity: EntitySeries, params: MixtureParams,
                      rows: Optional[np.ndarray] = None,
                      weights: Optional[np.ndarray] = None) -> np.ndarray:
    """k-vector of sum_{t in rows} w(t) psi_it^(l); all rows, unit weights by default"""
    if rows is None:
        rows = np.arange(entity.T)
    if weights is None:
        weights = np.ones(len(rows))
    return np.array([np.sum(weights * psi_at(entity.observations, rows, comp)) for comp in params.components])


def log_normalisers(params: MixtureParams) -> np.ndarray:
    """ln of (2 pi)^(-d/2) |Sigma_l|^(-1/2) per component"""
    return np.array([-0.5 * params.d * LOG_2PI - 0.5 * comp.log_det for comp in params.components])


def safe_log(alpha: np.ndarray) -> np.ndarray:
    """ln alpha with -inf for zero entries, which the mixture logs skip"""
    with np.errstate(divide='ignore'):
        return np.log(np.asarray(alpha, dtype=np.float64))


def log_mixture(log_coef: np.ndarray, psi_sums: np.ndarray, T: int) -> float:
    """ln sum_l exp(log_coef_l - psi_l / (2 T)) over components with finite log_coef"""
    active = np.isfinite(log_coef)
    if not np.any(active):
        raise ValueError("Mixture has no component with positive weight")
    return float(logsumexp(log_coef[active] - psi_sums[active] / (2.0 * T)))


def _check_finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise NumericError(f"{what} is not finite ({value})")
    return value


def psi_matrix(data: TimeSeriesDataset, params: MixtureParams, threads: int = 1) -> np.ndarray:
    """N x k matrix of psi_i^(l)"""
    rows = parallel_map(lambda e: weighted_psi_sums(e, params), data.entities, threads)
    return np.vstack(rows)


def entity_nll(entity: EntitySeries, params: MixtureParams) -> float:
    """f_i(alpha, theta)"""
    log_coef = safe_log(params.alpha) + log_normalisers(params)
    value = -log_mixture(log_coef, weighted_psi_sums(entity, params), entity.T)
    return _check_finite(value, f"Negative log-likelihood of entity {entity.id}")


def full_objective(data: TimeSeriesDataset, params: MixtureParams, threads: int = 1) -> float:
    """f(alpha, theta) = sum_i f_i"""
    psi = psi_matrix(data, params, threads)
    log_coef = safe_log(params.alpha) + log_normalisers(params)
    values = np.array([-log_mixture(log_coef, psi[n], e.T) for n, e in enumerate(data.entities)])
    return _check_finite(float(np.sum(values)), "Objective f")


def normalised_alpha(params: MixtureParams) -> Tuple[np.ndarray, float]:
    """(alpha'(theta), ln Z(alpha, theta))"""
    log_coef = safe_log(params.alpha) + log_normalisers(params)
    active = np.isfinite(log_coef)
    log_z = float(logsumexp(log_coef[active]))
    alpha_prime = np.zeros(params.k)
    alpha_prime[active] = np.exp(log_coef[active] - log_z)
    alpha_prime /= alpha_prime.sum()
    return alpha_prime, log_z


def reduced_objective(data: TimeSeriesDataset, params: MixtureParams,
                      alpha: Optional[Sequence[float]] = None, threads: int = 1) -> float:
    """f'(alpha, theta) with coefficients alpha (default params.alpha)"""
    log_coef = safe_log(params.alpha if alpha is None else alpha)
    psi = psi_matrix(data, params, threads)
    values = np.array([-log_mixture(log_coef, psi[n], e.T) for n, e in enumerate(data.entities)])
    return _check_finite(float(np.sum(values)), "Objective f'")


def normalized_objective(data: TimeSeriesDataset, params: MixtureParams,
                         threads: int = 1) -> Tuple[float, float, np.ndarray]:
    """(f'(alpha'(theta), theta), phi(alpha, theta), alpha'(theta))"""
    alpha_prime, log_z = normalised_alpha(params)
    f_prime = reduced_objective(data, params, alpha_prime, threads)
    phi = -data.N * log_z
    return f_prime, _check_finite(phi, "Offset phi"), alpha_prime


def coreset_objective(data: TimeSeriesDataset, coreset: Coreset, params: MixtureParams,
                      alpha: Optional[Sequence[float]] = None) -> float:
    """f'_S(alpha, theta) on a weighted coreset

    The 1/(2 T_i) normalisation always uses the full series length T_i.
    """
    coreset.check(data)
    log_coef = safe_log(params.alpha if alpha is None else alpha)
    values = np.array([
        coreset.entity_weights[i] * -log_mixture(
            log_coef,
            weighted_psi_sums(data[i], params, coreset.times_array(i), coreset.weights_array(i)),
            data[i].T,
        )
        for i in coreset.entity_ids
    ])
    return _check_finite(float(np.sum(values)), "Coreset objective f'_S")
