"""
Exception hierarchy for morita-lab.

Check-style operations report failures in a Report instead of raising; these
exceptions are for constructors and transfers whose outputs would be unusable.
"""


class MoritaError(Exception):
    """Base class for all morita-lab errors."""


class ShapeMismatchError(MoritaError, ValueError):
    """Operands have incompatible shapes."""


class NotHermitianError(MoritaError, ValueError):
    """A Hermitian operand was expected."""


class NotPositiveError(MoritaError, ValueError):
    """A positive semidefinite operand was expected."""


class ValidationError(MoritaError):
    """An invariant residual exceeded its tolerance."""

    def __init__(self, message, residual=None, tolerance=None):
        super().__init__(message)
        self.residual = residual
        self.tolerance = tolerance


class ConditioningError(MoritaError):
    """A Gram matrix or operator is numerically singular."""


class TransferError(ValidationError):
    """A transferred map failed one of its defining identities."""


class ScenarioError(MoritaError, ValueError):
    """Malformed scenario or unusable generation request."""


class BundleNotFoundError(MoritaError, FileNotFoundError):
    """No bundle directory under the given name."""
