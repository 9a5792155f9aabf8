"""Generalized Yule network-growth model with in-link detachment."""

from .errors import (
    AccuracyError,
    DomainError,
    FitError,
    InputFormatError,
    NumericOverflowError,
    PoleError,
    ResourceError,
    YuleError,
)
from .model import ModelParams, PmfTable, Regime

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "DomainError",
    "FitError",
    "InputFormatError",
    "ModelParams",
    "NumericOverflowError",
    "PmfTable",
    "PoleError",
    "Regime",
    "ResourceError",
    "YuleError",
]
