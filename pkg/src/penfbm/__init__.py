"""Penalized fractional Brownian motion: path generation, penalization
weights, the limit law, its Brownian SDE representation and weighted
statistics for checking the convergences numerically."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import (
    BudgetExhausted,
    ConfigInvalid,
    DegenerateWeights,
    EmptySample,
    FactorizationFailure,
    NegativeEigenvalue,
    NonfiniteWeight,
    PenFBMError,
)
from .rng import Seed

__all__ = [
    "BACKEND",
    "BudgetExhausted",
    "ConfigInvalid",
    "DegenerateWeights",
    "EmptySample",
    "FactorizationFailure",
    "NegativeEigenvalue",
    "NonfiniteWeight",
    "PenFBMError",
    "Seed",
    "__version__",
]
