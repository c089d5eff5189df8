"""
Coreset module for tscoreset

Two-stage sensitivity sampling of entities and time periods, plus the
uniform and static-importance baselines.
"""

from .sensitivity import SensitivityProfile, entity_sensitivities, time_sensitivities
from .sampling import SamplerConfig, build_coreset, sample_entities, sample_times, theoretical_sizes
from .baselines import lfkf_baseline, uniform_baseline

__all__ = [
    'SensitivityProfile', 'entity_sensitivities', 'time_sensitivities',
    'SamplerConfig', 'build_coreset', 'sample_entities', 'sample_times', 'theoretical_sizes',
    'lfkf_baseline', 'uniform_baseline',
]
