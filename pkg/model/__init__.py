"""
Model module for tscoreset

Domain types of GMM-AR(1) time-series clustering and exact evaluation of its
likelihood objectives.
"""

from .types import (
    Component,
    Coreset,
    EntitySeries,
    MixtureParams,
    ModelBounds,
    TimeSeriesDataset,
)
from .likelihood import (
    coreset_objective,
    entity_nll,
    full_objective,
    normalized_objective,
    psi_i,
    psi_it,
    psi_o,
    reduced_objective,
)

__all__ = [
    'Component', 'Coreset', 'EntitySeries', 'MixtureParams', 'ModelBounds', 'TimeSeriesDataset',
    'coreset_objective', 'entity_nll', 'full_objective', 'normalized_objective',
    'psi_i', 'psi_it', 'psi_o', 'reduced_objective',
]
