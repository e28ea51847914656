"""Exception types shared across flexpool."""


class FlexpoolError(Exception):
    """Base class for all flexpool errors."""


class NumericalFailure(FlexpoolError):
    """Iteration or conditioning limits exceeded inside a numerical kernel."""


class InfeasibleError(FlexpoolError):
    """An optimization problem has an empty feasible set."""


class UnboundedError(FlexpoolError):
    """An optimization problem is unbounded in the optimization direction."""


class EmptyPolytope(InfeasibleError):
    pass


class EmptyIntersection(InfeasibleError):
    """Projection target {G beta = d, |beta| <= betabar} appears to be empty."""


class InfeasibleTarget(InfeasibleError):
    """An aggregate trajectory lies outside the aggregate feasible set.

    ``facet`` holds the index of the first violated facet-normal direction.
    """

    def __init__(self, message, facet=None):
        super().__init__(message)
        self.facet = facet


class DimensionMismatch(FlexpoolError, ValueError):
    pass


class FamilyMismatch(FlexpoolError, ValueError):
    pass


class BetaOutOfRange(FlexpoolError, ValueError):
    pass


class NegativeBeta(FlexpoolError, ValueError):
    pass


class NonConvexInput(FlexpoolError, ValueError):
    pass


class EmptyRemainder(FlexpoolError, ValueError):
    pass


class ParseError(FlexpoolError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class LengthMismatch(FlexpoolError, ValueError):
    pass


class MaxItersExceeded(UserWarning):
    """The subgradient loop hit its iteration cap; the best-so-far point is returned."""
