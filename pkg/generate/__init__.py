"""
Generation module for tscoreset

Synthetic GMM-AR(1) panels with recorded ground truth.
"""

from .synthetic import GenConfig, GroundTruth, draw_params, generate, simulate_entity

__all__ = ['GenConfig', 'GroundTruth', 'draw_params', 'generate', 'simulate_entity']
