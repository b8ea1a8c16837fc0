"""Exception types shared across the package."""


class FairclustError(Exception):
    """Base class for all package-specific errors."""


class ParseError(FairclustError):
    """Raised when an instance file or report cannot be parsed."""


class MetricError(FairclustError):
    """Raised when a distance matrix fails a validation check."""


class InfeasibleFairnessError(FairclustError):
    """Raised when a fairness specification cannot be met by any clustering."""


class SimplexError(FairclustError):
    """Base class for LP solver failures."""


class SimplexIterationError(SimplexError):
    """Raised when the pivot cap is hit without convergence."""


class FlowError(FairclustError):
    """Base class for flow solver failures."""


class FlowInfeasibleError(FlowError):
    """Raised when a flow instance admits no feasible routing."""


class InternalError(FairclustError):
    """Raised when a proved invariant fails at runtime; indicates a bug."""


class SearchCapError(FairclustError):
    """Raised when a brute-force search would exceed its enumeration cap."""


class NoFairSolutionError(FairclustError):
    """Raised when a declared-infeasible fairness outcome is established."""


class WitnessError(FairclustError):
    """Raised when a supplied fractional witness is not a fair feasible solution."""
