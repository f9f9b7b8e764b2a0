"""Exception hierarchy shared across the package."""


class RlScaleError(Exception):
    """Base class for all package errors."""


class ParseError(RlScaleError):
    """Malformed run-log input (bad header, row shape, field, or duplicate)."""


class ValidationError(RlScaleError):
    """A domain-type invariant or manifest constraint was violated."""


class UnusableCurveError(RlScaleError):
    """Preprocessing removed every point of a curve."""


class ContractError(RlScaleError):
    """An operation precondition was violated (e.g. non-monotone input)."""


class EstimationError(RlScaleError):
    """A statistical estimate could not be produced (e.g. all replicates dropped)."""


class FitError(RlScaleError):
    """Numerical fitting failed (degenerate inputs, rank deficiency, divergence)."""


class InfeasibleError(RlScaleError):
    """An allocation problem has no feasible point at the given budget."""

    def __init__(self, message: str, minimum: float | None = None):
        super().__init__(message)
        self.minimum = minimum
