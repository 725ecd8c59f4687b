"""Exception hierarchy. Everything derives from :class:`EDMError`."""


class EDMError(Exception):
    """Base class for all package errors."""


class DimensionError(EDMError, ValueError):
    """Array shapes are inconsistent with each other or with the instance."""


class SymmetryError(EDMError, ValueError):
    """A matrix that must be symmetric is not."""


class DomainError(EDMError, ValueError):
    """An argument lies outside the domain of the operation."""


class ValidationError(EDMError, ValueError):
    """Input data violates a named invariant."""

    def __init__(self, invariant, detail=""):
        self.invariant = invariant
        msg = f"invariant violated: {invariant}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class CapacityError(EDMError, MemoryError):
    """Dense assembly requested beyond the size guard."""


class PreconditionError(EDMError, ValueError):
    """An operation was called outside its documented precondition."""


class NumericalError(EDMError, ArithmeticError):
    """Non-finite values or a breakdown during iteration.

    ``trace`` carries whatever iteration history was collected.
    """

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace if trace is not None else []


class SingularHessianError(NumericalError):
    """Newton step requested at an (numerically) singular Hessian."""

    def __init__(self, msg, iterate=None, trace=None):
        super().__init__(msg, trace)
        self.iterate = iterate
