"""Exception types shared across the package."""


class InvalidInput(ValueError):
    """Input violates a documented precondition (relations, shapes, parity)."""


class BranchError(ValueError):
    """A matrix logarithm was requested at or beyond the principal branch.

    Callers that hit this are expected to subdivide the path they are working
    on rather than guess a branch.
    """


class ResolutionError(ValueError):
    """Sampling too coarse for the requested invariant (refine T or N)."""


class NonConvergence(RuntimeError):
    """An energy flow did not settle within its sweep budget."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
