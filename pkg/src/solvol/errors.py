"""Exception hierarchy shared by every solvol module."""


class SolvolError(Exception):
    """Base class for all solvol failures."""


class DomainError(SolvolError, ValueError):
    """Argument outside the domain of validity, or a non-finite evaluation."""


class ConvergenceError(SolvolError, RuntimeError):
    """An iterative method exhausted its budget before meeting tolerance."""


class DivergenceError(SolvolError, RuntimeError):
    """An ODE solution left the representable range."""


class PreconditionError(SolvolError, ValueError):
    """The operation does not apply to the given model or arguments."""


class HypothesisError(PreconditionError):
    """A curvature hypothesis required by a bound is violated on the model.

    The failing report is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
