"""Forecasting-competition simulator: scoring, block-correlated event
distributions, Multiplicative Weights / FTRL selection, strategic agents,
dependent-sum concentration machinery, and an exact-enumeration oracle."""

from . import agents, concentration, distributions, experiments, mechanism, oracle, scoring
from .errors import (
    EnumerationCapError,
    NonConcaveObjectiveError,
    ZeroProbabilityConditionError,
)

__version__ = "0.1.0"

__all__ = [
    "agents",
    "concentration",
    "distributions",
    "experiments",
    "mechanism",
    "oracle",
    "scoring",
    "EnumerationCapError",
    "NonConcaveObjectiveError",
    "ZeroProbabilityConditionError",
]
