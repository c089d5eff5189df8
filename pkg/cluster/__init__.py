"""
Clustering module for tscoreset

k-means++ and Lloyd refinement over entity means, used as the reduction
behind the entity-level sensitivities.
"""

from .kmeans import KMeansResult, entity_summaries, kmeans_entities, kmeans_plusplus, one_means_cost

__all__ = ['KMeansResult', 'entity_summaries', 'kmeans_entities', 'kmeans_plusplus', 'one_means_cost']
