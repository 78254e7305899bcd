"""Feedback-driven quantum reservoir computing with atoms in a driven lossy cavity."""

from .errors import (ContractViolation, DegenerateTargetError, FbqrcError, IntegratorError,
                     ReadoutError, ResourceError, TruncationError)
from .reservoir import FeedbackConfig, ReadoutSeries, Reservoir
from .system import ReservoirParams, SystemSpec, build_space

__version__ = "0.1.0"

__all__ = ["ContractViolation", "DegenerateTargetError", "FbqrcError", "FeedbackConfig",
           "IntegratorError", "ReadoutError", "ReadoutSeries", "Reservoir", "ReservoirParams",
           "ResourceError", "SystemSpec", "TruncationError", "build_space"]
