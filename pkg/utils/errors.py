"""
Exception types shared across the toolkit
"""

import numpy as np


class SingularMatrixError(np.linalg.LinAlgError):
    """A covariance matrix failed its Cholesky or determinant check"""


class NumericError(ArithmeticError):
    """An objective or parameter became non-finite"""


class SchemaError(ValueError):
    """A file carries an unknown schema major version or is malformed"""
