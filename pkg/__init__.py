"""
tscoreset: coresets for GMM-AR(1) time-series clustering

Likelihood evaluation, k-means reduction, sensitivity-sampled coresets,
weighted EM fitting, synthetic data and a baseline experiment harness.

Version: 1.0.0
"""

__version__ = "1.0.0"
__title__ = "tscoreset"
__description__ = "Coresets for clustering Gaussian-mixture AR(1) time series"
