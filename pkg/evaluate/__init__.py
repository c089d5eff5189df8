"""
Evaluation module for tscoreset

Likelihood-ratio metric and the coreset-versus-full-data experiment harness.
"""

from .experiment import (
    AggregateRow,
    ExperimentReport,
    ReportRow,
    SizeSpec,
    aggregate,
    likelihood_ratio,
    run_experiment,
)

__all__ = ['AggregateRow', 'ExperimentReport', 'ReportRow', 'SizeSpec', 'aggregate',
           'likelihood_ratio', 'run_experiment']
