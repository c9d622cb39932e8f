"""Exception types shared across the toolkit.

Input problems derive from ValueError so callers can treat them like any other
bad argument; solver outcomes derive from RuntimeError.
"""


class RegcertError(ValueError):
    """Base class for invalid inputs and failed hypotheses."""


class DimensionError(RegcertError):
    """A point does not have the dimension of the space it is used in."""


class DomainError(RegcertError):
    """A map was evaluated outside its declared domain box."""


class SpecError(RegcertError):
    """A map, function or path specification could not be parsed."""


class ConfigError(RegcertError):
    """An experiment document is malformed or contains unknown keys."""


class GraphError(RegcertError):
    """A reference point is not on the graph, or a window holds no graph points."""


class HypothesisError(RegcertError):
    """A propagation rule was called with data that violates its hypothesis."""


class SearchError(RegcertError):
    """A bisection ladder reached its floor without finding an admissible radius."""


class SolverError(RuntimeError):
    """Base class for local solver outcomes."""


class SolverStall(SolverError):
    """The tolerance was not reached at the maximum refinement depth."""

    def __init__(self, message: str, best_residual: float = float('inf')):
        super().__init__(message)
        self.best_residual = best_residual


class TrustRegionExhausted(SolverError):
    """Every candidate in the trust region has an empty image."""


class WarmStartBoundError(SolverError):
    """A step violated the error bound implied by an attached certificate."""


class InfeasibleStartError(SolverError, RegcertError):
    """The initial point of a trajectory does not solve the inclusion at t = 0."""
