"""Exception types shared across the solver."""


class SolverError(Exception):
    """Base class for every error raised by this package."""


class NodeInfeasible(SolverError):
    """The merged bounds of a node are contradictory; the node must be pruned."""


class OracleFailure(SolverError):
    """An inner oracle reported infeasibility or returned an unusable result."""


class SplitInfeasible(SolverError):
    """An active set could not be split, typically because a vertex is
    fractional in the branching coordinate (an oracle contract violation)."""


class AssignmentInfeasible(SolverError):
    """No perfect assignment avoids the forbidden entries."""


class BudgetInfeasible(SolverError):
    """The knapsack budget cannot be met under the current bounds."""


class UnreachableDemand(SolverError):
    """A positive demand has no path from its source to its destination."""


class InvalidSense(SolverError):
    """A bound sense other than 'lessthan' / 'greaterthan' was supplied."""


class NonDescentDirection(SolverError):
    """Line search was invoked along a direction of ascent."""


class DomainViolation(SolverError):
    """An objective was evaluated outside its domain."""


class WarmStartFailure(SolverError):
    """The projection used to build a domain-feasible start never entered
    the objective's domain."""


class NoFractionalVariable(SolverError):
    """Branching was requested on an integral iterate (internal error)."""


class BudgetUnrestorable(SolverError):
    """Rounding could not redistribute the residual budget under the upper
    bounds."""


class InstanceError(SolverError):
    """An instance file failed schema validation."""
