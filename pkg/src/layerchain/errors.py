"""Exception and warning types raised across the package."""


class LayerChainError(Exception):
    """Base class for all package errors."""


class InvalidInstance(LayerChainError, ValueError):
    """Scenario data violates a structural invariant."""


class InfeasibleInstance(LayerChainError):
    """Total cpu demand exceeds total cpu capacity."""


class DisconnectedTopology(InvalidInstance):
    pass


class AlreadyAugmented(LayerChainError):
    pass


class NotAugmented(LayerChainError):
    pass


class DimensionMismatch(LayerChainError, ValueError):
    pass


class NonFiniteEntries(LayerChainError, ValueError):
    pass


class InfeasibleReference(LayerChainError):
    """The linearization point of a subproblem is not feasible."""


class Infeasible(LayerChainError):
    """A subproblem has no feasible assignment."""


class NoFeasiblePoint(LayerChainError):
    """No feasible starting deployment could be constructed."""

    def __init__(self, message, tightest=None):
        super().__init__(message)
        self.tightest = tightest


class NoFeasiblePlacement(LayerChainError):
    """A greedy strategy ran out of servers with enough capacity."""


class OverSubscribed(LayerChainError):
    """Demands on a server exceed its cpu capacity."""


class GenerationFailed(LayerChainError):
    pass


class BudgetExhausted(UserWarning):
    """Branch-and-bound stopped at its node limit; the incumbent may not be optimal."""


class DegenerateBounds(UserWarning):
    """A normalization range collapsed to a point; a unit denominator is used."""
