"""Canonical-correlation fusion toolkit.

Closed-form CCA, a differentiable correlation loss, an alternating 2-D CCA
solver, two-view fusion training schedules, depth losses and detection
metrics, all in numpy with a small compiled core for the inner loops.
"""
from .cca import CcaModel, canonical_correlation, fit_cca, project
from .cca2d import Cca2dModel, fit_2dcca, project_2d
from .corr import corr_loss, corr_loss_grad
from .errors import (
    CcaError,
    ConfigError,
    DegenerateInputError,
    DimensionError,
    FormatError,
    ParameterError,
    SingularityError,
    TrainingError,
)

__version__ = "0.1.0"

__all__ = [
    "CcaError",
    "CcaModel",
    "Cca2dModel",
    "ConfigError",
    "DegenerateInputError",
    "DimensionError",
    "FormatError",
    "ParameterError",
    "SingularityError",
    "TrainingError",
    "__version__",
    "canonical_correlation",
    "corr_loss",
    "corr_loss_grad",
    "fit_2dcca",
    "fit_cca",
    "project",
    "project_2d",
]
