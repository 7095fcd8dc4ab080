"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """Raised when an input violates a documented precondition."""


class OptimizationFailureError(RuntimeError):
    """Raised when an iterative optimizer diverges or hits non-finite values.

    Carries the last iterate so callers can inspect how far the search got.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class NoCounterfactualError(RuntimeError):
    """Raised when no counterfactual can be constructed for an instance."""


class ProvenanceError(InvalidArgumentError):
    """Raised when artifacts fed into a report do not share provenance."""
