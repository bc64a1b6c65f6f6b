"""Exception types shared across the toolkit."""


class CPFockError(Exception):
    """Base class for all toolkit errors."""


class MalformedInputError(CPFockError):
    """Input matrix or file violates a structural invariant."""


class DimensionMismatchError(CPFockError):
    """Operands have incompatible dimensions."""


class NotPSDError(CPFockError):
    """A positivity precondition failed beyond tolerance."""


class NotInvertibleError(CPFockError):
    """An operator required to be invertible is numerically singular."""


class SubinvarianceError(CPFockError):
    """D >= 0 and D - phi(D) >= 0 does not hold at tolerance."""


class PreconditionError(CPFockError):
    """An operation-specific precondition failed."""


class DimensionCapError(CPFockError):
    """A truncated Fock space would exceed the configured dimension cap."""


class ExtractionError(CPFockError):
    """Row-contraction extraction left an intertwining residual above tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(CPFockError):
    """An iteration failed to converge within its budget.

    Carries the residual trace so callers can inspect the failure.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []
