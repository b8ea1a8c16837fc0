"""Fair clustering toolkit: LP-based black-box rounding with essential
fairness, exact-ratio k-center/k-supplier approximations, fairlet
decompositions, and brute-force reference oracles."""

from .errors import (
    FairclustError,
    FlowInfeasibleError,
    InfeasibleFairnessError,
    InternalError,
    MetricError,
    NoFairSolutionError,
    ParseError,
    SearchCapError,
    SimplexIterationError,
    WitnessError,
)
from .instance import (
    FairnessSpec,
    FractionalSolution,
    Instance,
    IntegralClustering,
    Objective,
    build_instance,
    check_essential_fairness,
    cost,
    fairlet_base,
    is_exactly_fair,
    load_instance,
    snap_tolerance,
)

__version__ = "0.1.0"

__all__ = [
    "FairclustError", "FlowInfeasibleError", "InfeasibleFairnessError",
    "InternalError", "MetricError", "NoFairSolutionError", "ParseError",
    "SearchCapError", "SimplexIterationError", "WitnessError",
    "FairnessSpec", "FractionalSolution", "Instance", "IntegralClustering",
    "Objective", "build_instance", "check_essential_fairness", "cost",
    "fairlet_base", "is_exactly_fair", "load_instance", "snap_tolerance",
]
