"""
Fitting module for tscoreset

Weighted generalized EM over full data or a coreset.
"""

from .em import FitConfig, FitResult, fit, init_params

__all__ = ['FitConfig', 'FitResult', 'fit', 'init_params']
