"""First-order methods with Bregman-geometry strong convexity and online convergence certificates."""
from .errors import (ConfigError, DegenerateBeta, DegenerateC0, DomainError, FrameworkError, InvariantViolation,
                     MissingReference, NonNegativeAlpha, PreconditionError, RangeViolation, Unbounded,
                     UnsupportedCombination)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateBeta", "DegenerateC0", "DomainError", "FrameworkError", "InvariantViolation",
    "MissingReference", "NonNegativeAlpha", "PreconditionError", "RangeViolation", "Unbounded",
    "UnsupportedCombination",
]
