"""Branch-and-bound driver.

Nodes carry their own warm-start state (active set, shadow pool, bounds), the
continuous subproblems are solved by the configured Frank-Wolfe variant with a
depth-adaptive gap tolerance, and every true oracle call yields an
integer-feasible vertex that is screened as an incumbent candidate, so upper
bounds appear from the root node on.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .core import GREATER, INT_TOL, LESS, ActiveSet, IntegerBounds
from .errors import (
    AssignmentInfeasible,
    BudgetInfeasible,
    NodeInfeasible,
    NoFractionalVariable,
    OracleFailure,
    SolverError,
    UnreachableDemand,
    WarmStartFailure,
)
from .fw import (
    FWStatus,
    FWVariant,
    Secant,
    ShadowPool,
    domain_warm_start,
    solve_node_dicg,
    solve_node_fw,
)
from .heuristics import (
    follow_gradient,
    hyperplane_aware_rounding,
    probability_rounding,
    simple_rounding,
)
from .lmo import ManagedLMO, TimeTrackingLMO
from .settings import BranchingRule, Settings, create_default_settings

_INFEASIBLE_ERRORS = (
    NodeInfeasible,
    AssignmentInfeasible,
    BudgetInfeasible,
    UnreachableDemand,
    OracleFailure,
)


class SolvingStage(Enum):
    SOLVING = "solving"
    OPTIMAL_REACHED = "optimal_reached"
    USER_STOP = "user_stop"
    TIME_LIMIT = "time_limit"
    NODE_LIMIT = "node_limit"
    INFEASIBLE = "infeasible"


@dataclass
class ProblemSpec:
    """Everything the driver needs to know about a problem instance.

    ``f(x)`` returns the objective value; ``grad(storage, x)`` writes the
    gradient into ``storage``.  ``lmo`` is either a :class:`ManagedLMO` or a
    self-managed oracle exposing the bound-management interface.
    """

    f: callable
    grad: callable
    lmo: object
    n: int
    domain_oracle: Optional[callable] = None
    find_domain_point: Optional[callable] = None
    #: budget of a simplex-like region, enables hyperplane-aware rounding
    simplex_budget: Optional[float] = None
    name: str = ""


@dataclass
class TraceRow:
    time_s: float
    nodes: int
    lb: float
    ub: Optional[float]


@dataclass
class BnBNode:
    id: int
    local_bounds: IntegerBounds
    active_set: Optional[ActiveSet]
    shadow_pool: ShadowPool
    lower_bound: float
    depth: int
    start_point: Optional[np.ndarray] = None


class Tree:
    """Open-node pool (best-bound order), incumbent, counters, and trace."""

    def __init__(self, global_bounds: IntegerBounds):
        self.global_bounds = global_bounds
        self.solving_stage = SolvingStage.SOLVING
        self.incumbent: Optional[np.ndarray] = None
        self.incumbent_value: float = math.inf
        self.nodes_processed = 0
        self.trace: list[TraceRow] = []
        self._heap: list[tuple[float, int, BnBNode]] = []
        self._next_id = 0
        self.solution_callback = None

    def new_id(self) -> int:
        nid = self._next_id
        self._next_id += 1
        return nid

    def push(self, node: BnBNode) -> None:
        heapq.heappush(self._heap, (node.lower_bound, node.id, node))

    def pop(self) -> BnBNode:
        """Remove and return the open node with the smallest lower bound;
        ties break to the lowest id."""
        return heapq.heappop(self._heap)[2]

    def peek(self) -> BnBNode:
        return self._heap[0][2]

    def open_count(self) -> int:
        return len(self._heap)

    def open_lower_bounds(self):
        return [entry[0] for entry in self._heap]

    def lower_bound(self) -> float:
        """Global lower bound: the best open bound, capped at the incumbent;
        equals the incumbent when the open set is empty."""
        if self._heap:
            return min(self._heap[0][0], self.incumbent_value)
        return self.incumbent_value

    def add_solution(self, x, value: float) -> bool:
        if value < self.incumbent_value - 1e-12:
            self.incumbent = np.array(x, dtype=float)
            self.incumbent_value = float(value)
            if self.solution_callback is not None:
                self.solution_callback(self, self.incumbent, self.incumbent_value)
            return True
        return False

    def record(self, elapsed: float) -> None:
        ub = self.incumbent_value if self.incumbent is not None else None
        self.trace.append(TraceRow(elapsed, self.nodes_processed, self.lower_bound(), ub))


def select_node(tree: Tree) -> BnBNode:
    return tree.pop()


def premature_stop_check(tree: Tree, node: BnBNode, primal: float,
                         gap_estimate: float, k: Optional[int] = 2,
                         abs_gap: float = 1e-6) -> bool:
    """Stop evaluating a node early when its current valid bound is dominated
    by the incumbent, or when at least ``k`` other open nodes have strictly
    better lower bounds."""
    bound = primal - gap_estimate
    if not math.isfinite(bound):
        return False
    if tree.incumbent is not None and bound >= tree.incumbent_value - abs_gap:
        return True
    if k is None:
        return False
    better = sum(1 for lb in tree.open_lower_bounds() if lb < bound)
    return better >= k


@dataclass
class _Outcome:
    kind: str  # pruned_bound | infeasible | fathomed | branched | no_children | requeued
    children: int = 0


class _BoundManager:
    """Installs a node's bounds on the tree-level oracle.

    Managed pathway: the wrapper merges node bounds per call.  Self-managed
    pathway: set the node's bounds (the first write resets stale fixings),
    then delete everything the previous node had set that this node does not;
    the deletion call always runs so the oracle rebuilds its reduced state.
    """

    def __init__(self, tlmo, self_managed: bool):
        self.tlmo = tlmo
        self.self_managed = self_managed
        self._applied: set = set()

    def apply(self, bounds: IntegerBounds) -> None:
        if not self.self_managed:
            self.tlmo.set_node_bounds(bounds)
            return
        new_keys = ({(i, GREATER) for i in bounds.lower}
                    | {(i, LESS) for i in bounds.upper})
        for i in sorted(bounds.lower):
            self.tlmo.set_bound(i, bounds.lower[i], GREATER)
        for i in sorted(bounds.upper):
            self.tlmo.set_bound(i, bounds.upper[i], LESS)
        self.tlmo.delete_bounds(sorted(self._applied - new_keys))
        self._applied = new_keys


class _Solver:
    def __init__(self, problem: ProblemSpec, settings: Settings):
        self.problem = problem
        self.settings = settings
        self.tol = settings.tolerances
        self.tlmo = TimeTrackingLMO(problem.lmo)
        self.self_managed = not isinstance(problem.lmo, ManagedLMO)
        if self.self_managed:
            int_vars = tuple(sorted(self.tlmo.get_integer_variables()))
            self.global_bounds = self.tlmo.build_global_bounds(int_vars)
        else:
            self.global_bounds = problem.lmo.global_bounds
        self.int_vars = np.asarray(self.global_bounds.int_vars, dtype=int)
        self.pure_integer = len(self.int_vars) >= problem.n
        self.bounds = _BoundManager(self.tlmo, self.self_managed)
        self.tree = Tree(self.global_bounds)
        self.tree.solution_callback = settings.branch_and_bound.solution_callback
        self.rng = np.random.default_rng(settings.heuristic.rng_seed)
        self.start_time = time.monotonic()
        self.deadline = (self.start_time + self.tol.time_limit_s
                         if self.tol.time_limit_s is not None else None)
        self._grad_buf = np.empty(problem.n)

    # -- helpers -----------------------------------------------------------

    def _line_search(self):
        ls = self.settings.frank_wolfe.line_search
        if ls is None:
            ls = Secant(domain_oracle=self.problem.domain_oracle)
        return ls

    def _vertex_hook(self):
        problem = self.problem
        tree = self.tree

        def hook(v):
            if problem.domain_oracle is not None and not problem.domain_oracle(v):
                return
            value = float(problem.f(v))
            if value < tree.incumbent_value - 1e-12:
                tree.add_solution(v, value)

        return hook

    def _fw_callback(self, node: BnBNode):
        k = self.settings.branch_and_bound.premature_stop_k
        if k is None:
            return None
        tree, tol = self.tree, self.tol

        def callback(state):
            if state.t % 8 != 0:
                return None
            if premature_stop_check(tree, node, state.primal, state.fw_gap,
                                    k=k, abs_gap=tol.abs_gap):
                return False
            return None

        return callback

    def _run_fw(self, node: BnBNode, warm, epsilon: float):
        conf = self.settings.frank_wolfe
        common = dict(
            line_search=self._line_search(),
            max_iter=self.tol.max_fw_iter,
            deadline=self.deadline,
            domain_oracle=self.problem.domain_oracle,
            callback=self._fw_callback(node),
            vertex_hook=self._vertex_hook(),
        )
        if conf.variant == FWVariant.DICG:
            start = warm.iterate() if isinstance(warm, ActiveSet) else warm
            return solve_node_dicg(self.problem.f, self.problem.grad, self.tlmo,
                                   start, epsilon, **common)
        local = node.local_bounds
        return solve_node_fw(
            conf.variant, self.problem.f, self.problem.grad, self.tlmo, warm,
            epsilon, lazy=conf.lazy, shadow_pool=node.shadow_pool,
            vertex_feasible=(lambda v: local.contains(v)) if (local.lower or local.upper) else None,
            **common,
        )

    def _prune_threshold(self) -> float:
        if self.tree.incumbent is None:
            return math.inf
        return self.tree.incumbent_value - self.tol.abs_gap

    # -- node lifecycle ----------------------------------------------------

    def make_root(self) -> BnBNode:
        n = self.problem.n
        pool = ShadowPool(capacity=10 * n)
        bounds = IntegerBounds(int_vars=self.global_bounds.int_vars)
        self.bounds.apply(bounds)
        dom = self.settings.domain
        active_set = None
        start_point = None
        if dom.active_set is not None:
            active_set = dom.active_set.copy()
        elif dom.start_point is not None:
            start_point = np.asarray(dom.start_point, dtype=float)
            active_set = ActiveSet.from_point(start_point)
        else:
            v0 = self.tlmo.compute_extreme_point(np.ones(n))
            self._vertex_hook()(v0)
            active_set = ActiveSet.from_point(v0)
            start_point = np.asarray(v0, dtype=float)
        if self.settings.frank_wolfe.variant == FWVariant.DICG:
            # No active set is maintained; children restart from fresh vertices.
            active_set = None
        return BnBNode(
            id=self.tree.new_id(),
            local_bounds=bounds,
            active_set=active_set,
            shadow_pool=pool,
            lower_bound=-math.inf,
            depth=0,
            start_point=start_point,
        )

    def process(self, node: BnBNode) -> _Outcome:
        tol = self.tol
        try:
            self.bounds.apply(node.local_bounds)
        except NodeInfeasible:
            return _Outcome("infeasible")
        epsilon = tol.node_epsilon(node.depth)

        warm = node.active_set
        if self.settings.frank_wolfe.variant == FWVariant.DICG:
            warm = node.start_point
            if warm is None or not node.local_bounds.contains(warm):
                try:
                    warm = self.tlmo.compute_extreme_point(np.ones(self.problem.n))
                except _INFEASIBLE_ERRORS:
                    return _Outcome("infeasible")
                self._vertex_hook()(warm)

        if self.problem.domain_oracle is not None:
            iterate = warm.iterate() if isinstance(warm, ActiveSet) else warm
            if iterate is None or not self.problem.domain_oracle(iterate):
                warm = self._repair_domain(node)
                if warm is None:
                    return _Outcome("infeasible")

        try:
            result = self._run_fw(node, warm, epsilon)
        except _INFEASIBLE_ERRORS:
            return _Outcome("infeasible")
        if result.status == FWStatus.DOMAIN_FAILURE:
            return _Outcome("infeasible")

        if result.active_set is not None:
            node.active_set = result.active_set
        node.start_point = np.asarray(result.iterate, dtype=float)
        bound = result.primal - result.fw_gap
        if math.isfinite(bound):
            node.lower_bound = max(node.lower_bound, bound)

        merged = node.local_bounds.merged_over(self.global_bounds)
        integral = self._register_candidates(node, result, merged)

        if node.lower_bound >= self._prune_threshold():
            return _Outcome("pruned_bound")
        if (tol.min_lower_bound is not None
                and node.lower_bound > tol.min_lower_bound):
            return _Outcome("pruned_bound")

        if result.status in (FWStatus.CALLBACK_STOP, FWStatus.TIME_LIMIT):
            # Stopped early; the bound is valid, so the node goes back into
            # the open set and continues from its stored state later.
            self.tree.push(node)
            return _Outcome("requeued")

        eps_tight = min(tol.fw_epsilon_min, tol.abs_gap)
        if integral and result.fw_gap > eps_tight:
            # The relaxation iterate is integral but the node tolerance left
            # slack beyond the optimality tolerance: tighten once before
            # deciding whether the node can be fathomed.
            try:
                result = self._run_fw(node, node.active_set
                                      if node.active_set is not None
                                      else node.start_point, eps_tight)
            except _INFEASIBLE_ERRORS:
                return _Outcome("infeasible")
            if result.active_set is not None:
                node.active_set = result.active_set
            node.start_point = np.asarray(result.iterate, dtype=float)
            bound = result.primal - result.fw_gap
            if math.isfinite(bound):
                node.lower_bound = max(node.lower_bound, bound)
            integral = self._register_candidates(node, result, merged)
            if node.lower_bound >= self._prune_threshold():
                return _Outcome("pruned_bound")
            if result.status in (FWStatus.CALLBACK_STOP, FWStatus.TIME_LIMIT) \
                    or (integral and result.fw_gap > eps_tight):
                self.tree.push(node)
                return _Outcome("requeued")

        if integral:
            # Certified: the node optimum is integer-feasible within the
            # optimality tolerance, so the subtree is exhausted.
            return _Outcome("fathomed")

        return self._branch(node, result)

    def _repair_domain(self, node: BnBNode) -> Optional[ActiveSet]:
        if self.problem.find_domain_point is None:
            return None
        merged = node.local_bounds.merged_over(self.global_bounds)
        x0 = self.problem.find_domain_point(merged)
        if x0 is None:
            return None
        try:
            return domain_warm_start(self.tlmo, x0, self.problem.domain_oracle,
                                     max_fw_iter=self.tol.max_fw_iter)
        except (WarmStartFailure, *_INFEASIBLE_ERRORS):
            return None

    # -- incumbent candidates ----------------------------------------------

    def _candidate_ok(self, x, merged: IntegerBounds) -> bool:
        iv = self.int_vars
        if np.any(np.abs(x[iv] - np.rint(x[iv])) > INT_TOL):
            return False
        if not merged.contains(x):
            return False
        if not self.tlmo.is_linear_feasible(x):
            return False
        if (self.problem.domain_oracle is not None
                and not self.problem.domain_oracle(x)):
            return False
        return True

    def _offer(self, x, merged: IntegerBounds) -> None:
        if x is None:
            return
        x = np.asarray(x, dtype=float)
        if not self._candidate_ok(x, merged):
            return
        value = float(self.problem.f(x))
        self.tree.add_solution(x, value)

    def _register_candidates(self, node: BnBNode, result, merged) -> bool:
        """Screen the iterate and the heuristics' candidates; returns whether
        the iterate itself is integer-feasible."""
        x = result.iterate
        iv = self.int_vars
        frac = np.abs(x[iv] - np.rint(x[iv]))
        integral = bool(np.all(frac <= INT_TOL))
        if integral:
            snapped = np.array(x, dtype=float)
            snapped[iv] = np.rint(snapped[iv])
            self._offer(snapped, merged)
        self._run_heuristics(node, x, merged)
        return integral

    def _run_heuristics(self, node: BnBNode, x, merged: IntegerBounds) -> None:
        conf = self.settings.heuristic
        iv = self.int_vars
        feasible = self.tlmo.is_linear_feasible
        lower = np.array([merged.lower.get(int(i), -math.inf) for i in iv])
        upper = np.array([merged.upper.get(int(i), math.inf) for i in iv])

        if self.rng.random() < conf.simple_rounding_prob:
            self._offer(simple_rounding(x, iv, lower, upper, feasible), merged)
        if self.rng.random() < conf.probability_rounding_prob:
            binary = np.all(lower >= -INT_TOL) and np.all(upper <= 1.0 + INT_TOL)
            if binary:
                self._offer(probability_rounding(x, iv, self.rng, feasible), merged)
        if self.rng.random() < conf.follow_gradient_prob:
            cand = follow_gradient(
                x, self.problem.f, self.problem.grad,
                self.tlmo.compute_extreme_point, conf.follow_gradient_steps,
                domain_oracle=self.problem.domain_oracle,
            )
            self._offer(cand, merged)
        if (self.problem.simplex_budget is not None
                and self.rng.random() < conf.hyperplane_aware_rounding_prob):
            cand = hyperplane_aware_rounding(
                x, iv, self.problem.simplex_budget, upper, feasible
            )
            self._offer(cand, merged)
        for _, prob, fn in conf.custom:
            if self.rng.random() < prob:
                self._offer(fn(node, x, merged, self), merged)

    # -- branching ----------------------------------------------------------

    def _branch(self, node: BnBNode, result) -> _Outcome:
        x = result.iterate
        iv = self.int_vars
        frac = np.abs(x[iv] - np.rint(x[iv]))
        fractional = frac > INT_TOL
        if not fractional.any():
            raise NoFractionalVariable("branch requested on an integral iterate")
        rule = self.settings.branch_and_bound.branching
        if rule == BranchingRule.GRADIENT_BASED:
            self.problem.grad(self._grad_buf, x)
            score = np.where(fractional, np.abs(self._grad_buf[iv]), -math.inf)
            var = int(iv[int(np.argmax(score))])
        else:
            var = int(iv[int(np.argmax(frac))])

        callback = self.settings.branch_and_bound.branch_callback
        if callback is not None and not callback(self.tree, node, var):
            return _Outcome("no_children")

        floor_val = math.floor(x[var])
        ceil_val = floor_val + 1.0
        left_bounds = node.local_bounds.tighten(var, floor_val, LESS)
        right_bounds = node.local_bounds.tighten(var, ceil_val, GREATER)
        if node.active_set is not None:
            left_set, right_set = node.active_set.split(var, floor_val, ceil_val)
        else:
            left_set = right_set = None
        for bounds, active_set in ((left_bounds, left_set), (right_bounds, right_set)):
            child = BnBNode(
                id=self.tree.new_id(),
                local_bounds=bounds,
                active_set=active_set,
                shadow_pool=node.shadow_pool.copy(),
                lower_bound=node.lower_bound,
                depth=node.depth + 1,
            )
            self.tree.push(child)
        return _Outcome("branched", children=2)

    # -- post-processing -----------------------------------------------------

    def postprocess(self) -> None:
        """Fix the integers to the incumbent and re-optimize the continuous
        part to the tightest tolerance; only applies to mixed problems."""
        tree = self.tree
        if tree.incumbent is None or self.pure_integer:
            return
        iv = self.int_vars
        fixed_vals = {int(i): float(np.rint(tree.incumbent[i])) for i in iv}
        try:
            fixed = IntegerBounds(fixed_vals, fixed_vals, self.global_bounds.int_vars)
            self.bounds.apply(fixed)
            v0 = self.tlmo.compute_extreme_point(np.ones(self.problem.n))
            conf = self.settings.frank_wolfe
            if conf.variant == FWVariant.DICG:
                result = solve_node_dicg(
                    self.problem.f, self.problem.grad, self.tlmo, v0,
                    self.tol.fw_epsilon_min, line_search=self._line_search(),
                    max_iter=self.tol.max_fw_iter, deadline=self.deadline,
                    domain_oracle=self.problem.domain_oracle,
                )
            else:
                result = solve_node_fw(
                    conf.variant, self.problem.f, self.problem.grad, self.tlmo,
                    ActiveSet.from_point(v0), self.tol.fw_epsilon_min,
                    line_search=self._line_search(), lazy=conf.lazy,
                    max_iter=self.tol.max_fw_iter, deadline=self.deadline,
                    domain_oracle=self.problem.domain_oracle,
                )
        except _INFEASIBLE_ERRORS:
            return
        x = np.asarray(result.iterate, dtype=float)
        x[iv] = np.rint(x[iv])
        if (result.status != FWStatus.DOMAIN_FAILURE
                and result.primal < tree.incumbent_value - 1e-12
                and self.tlmo.is_linear_feasible(x)):
            tree.incumbent = x
            tree.incumbent_value = float(result.primal)


def solve(problem: ProblemSpec, settings: Optional[Settings] = None):
    """Run branch-and-bound on ``problem``.

    Returns ``(solution, tracking_lmo, result)`` where ``solution`` is the
    best integer-feasible point (or None), ``tracking_lmo`` wraps the oracle
    with call counters, and ``result`` is a dict with the status, bounds,
    counters, and the bound trace.
    """
    settings = settings if settings is not None else create_default_settings()
    solver = _Solver(problem, settings)
    tree = solver.tree
    tol = solver.tol
    bb = settings.branch_and_bound
    verbose = bb.verbose

    try:
        root = solver.make_root()
        tree.push(root)
    except _INFEASIBLE_ERRORS:
        tree.solving_stage = SolvingStage.INFEASIBLE

    flags = dict(worse_than_incumbent=False, node_infeasible=False, lb_update=False)
    last_lb = -math.inf

    while tree.open_count() and tree.solving_stage == SolvingStage.SOLVING:
        lb = tree.lower_bound()
        ub = tree.incumbent_value
        if tree.incumbent is not None and ub - lb <= tol.gap_threshold(ub):
            tree.solving_stage = SolvingStage.OPTIMAL_REACHED
            break
        # the root is always processed so every run leaves a bound trace
        if tree.nodes_processed >= 1:
            if solver.deadline is not None and time.monotonic() >= solver.deadline:
                tree.solving_stage = SolvingStage.TIME_LIMIT
                break
            if tol.node_limit is not None and tree.nodes_processed >= tol.node_limit:
                tree.solving_stage = SolvingStage.NODE_LIMIT
                break

        # Callbacks run before the node is evaluated; it stays in the open set
        # so user code sees consistent tree bounds and can still stop the run.
        node = tree.peek()
        flags["lb_update"] = node.lower_bound > last_lb + 1e-12
        last_lb = max(last_lb, node.lower_bound)
        if bb.bnb_callback is not None:
            try:
                bb.bnb_callback(tree, node, **flags)
            except Exception as exc:
                raise SolverError(f"branch-and-bound callback failed: {exc}") from exc
        if tree.solving_stage != SolvingStage.SOLVING:
            break
        node = tree.pop()

        if node.lower_bound >= solver._prune_threshold():
            outcome = _Outcome("pruned_bound")
        else:
            outcome = solver.process(node)
        tree.nodes_processed += 1
        elapsed = time.monotonic() - solver.start_time
        tree.record(elapsed)
        flags = dict(
            worse_than_incumbent=outcome.kind == "pruned_bound",
            node_infeasible=outcome.kind == "infeasible",
            lb_update=False,
        )
        if verbose:
            gap = tree.incumbent_value - tree.lower_bound()
            print(
                f"node {node.id:>6} depth {node.depth:>3} "
                f"lb {tree.lower_bound():> .6e} ub {tree.incumbent_value:> .6e} "
                f"gap {gap:> .3e} lmo {solver.tlmo.call_count:>7} "
                f"time {elapsed:7.2f}s [{outcome.kind}]"
            )

    if tree.solving_stage == SolvingStage.SOLVING:
        if tree.incumbent is not None:
            tree.solving_stage = SolvingStage.OPTIMAL_REACHED
        else:
            tree.solving_stage = SolvingStage.INFEASIBLE

    if tree.solving_stage in (SolvingStage.OPTIMAL_REACHED, SolvingStage.USER_STOP,
                              SolvingStage.TIME_LIMIT, SolvingStage.NODE_LIMIT):
        solver.postprocess()

    # leave the tree-level oracle in its root (global-bounds) state
    solver.bounds.apply(IntegerBounds(int_vars=solver.global_bounds.int_vars))

    total_time = time.monotonic() - solver.start_time
    lb = tree.lower_bound()
    ub = tree.incumbent_value if tree.incumbent is not None else math.inf
    result = {
        "status": tree.solving_stage,
        "primal_value": ub,
        "lower_bound": lb,
        "upper_bound": ub,
        "abs_gap": ub - lb if tree.incumbent is not None else math.inf,
        "rel_gap": tol.relative_gap(ub, lb),
        "nodes_processed": tree.nodes_processed,
        "lmo_calls": solver.tlmo.call_count,
        "lmo_time_s": solver.tlmo.total_time_s,
        "total_time_s": total_time,
        "trace": tree.trace,
        "tree": tree,
    }
    return tree.incumbent, solver.tlmo, result
