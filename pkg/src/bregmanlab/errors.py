"""Exception hierarchy shared by every module."""


class FrameworkError(Exception):
    """Base class for all errors raised by bregmanlab."""


class UnsupportedCombination(FrameworkError):
    """The (prox-function, feasible set, composite term) triple has no closed-form solver."""


class Unbounded(FrameworkError):
    """A linear minimization was requested over an unbounded set."""


class DomainError(FrameworkError, ValueError):
    """A point lies outside the domain of the prox-function."""


class RangeViolation(FrameworkError, ValueError):
    """A parameter is outside its admissible range."""


class PreconditionError(FrameworkError, ValueError):
    """Problem constants or run settings violate an operation's precondition."""


class DegenerateBeta(PreconditionError):
    """L equals sigma_bar_f * sigma_d, so the constant scaling parameter is zero."""


class DegenerateC0(PreconditionError):
    """lambda_0 * sigma_f + beta_{-1} = 0; the initial certificate term is undefined."""


class NonNegativeAlpha(FrameworkError):
    """The schedule is too weak for the Hoelder analysis (some alpha_i >= 0)."""


class MissingReference(FrameworkError):
    """A bound needs x* (or f*) but no reference optimum is available."""


class InvariantViolation(FrameworkError):
    """A runtime invariant such as the certificate relation failed in strict mode."""

    def __init__(self, message, k=None, residual=None):
        super().__init__(message)
        self.k = k
        self.residual = residual


class ConfigError(FrameworkError, ValueError):
    """An experiment configuration failed validation."""
