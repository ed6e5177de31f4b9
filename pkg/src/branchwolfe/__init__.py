"""Mixed-integer convex optimization: branch-and-bound with error-adaptive
Frank-Wolfe node solvers over integer-restricted linear minimization oracles.
"""

from .bnb import (
    BnBNode,
    ProblemSpec,
    SolvingStage,
    TraceRow,
    Tree,
    premature_stop_check,
    select_node,
    solve,
)
from .core import ActiveSet, IntegerBounds, Tolerances, GREATER, LESS
from .errors import SolverError
from .fw import (
    Agnostic,
    Backtracking,
    FWResult,
    FWStatus,
    FWVariant,
    LineSearch,
    Secant,
    ShadowPool,
    domain_warm_start,
    fw_gap,
    solve_node_dicg,
    solve_node_fw,
)
from .lmo import (
    BoundedLMO,
    LinearMinimizationOracle,
    ManagedLMO,
    SelfManagedLMO,
    TimeTrackingLMO,
    managed_compute_extreme_point,
)
from .polytopes import (
    BirkhoffLMO,
    DesignFlowLMO,
    FlowLMO,
    HypercubeLMO,
    SimplexKnapsackLMO,
    hungarian,
    knapsack_extreme_point,
)
from .settings import (
    BranchingRule,
    Settings,
    apply_setting,
    create_default_settings,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveSet",
    "Agnostic",
    "Backtracking",
    "BirkhoffLMO",
    "BnBNode",
    "BoundedLMO",
    "BranchingRule",
    "DesignFlowLMO",
    "FlowLMO",
    "FWResult",
    "FWStatus",
    "FWVariant",
    "GREATER",
    "HypercubeLMO",
    "IntegerBounds",
    "LESS",
    "LineSearch",
    "LinearMinimizationOracle",
    "ManagedLMO",
    "ProblemSpec",
    "Secant",
    "SelfManagedLMO",
    "Settings",
    "ShadowPool",
    "SimplexKnapsackLMO",
    "SolverError",
    "SolvingStage",
    "TimeTrackingLMO",
    "Tolerances",
    "TraceRow",
    "Tree",
    "apply_setting",
    "create_default_settings",
    "domain_warm_start",
    "fw_gap",
    "hungarian",
    "knapsack_extreme_point",
    "managed_compute_extreme_point",
    "premature_stop_check",
    "select_node",
    "solve",
    "solve_node_dicg",
    "solve_node_fw",
]
