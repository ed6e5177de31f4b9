"""Concrete feasible regions: hypercube, scaled truncated simplex (continuous
knapsack), the doubly stochastic polytope with assignment-based minimization,
and an uncapacitated shortest-path flow region for network design.
"""

from __future__ import annotations

import heapq
import math
import warnings

import numpy as np

from .core import GREATER, LESS, IntegerBounds, check_sense
from .errors import (
    AssignmentInfeasible,
    BudgetInfeasible,
    UnreachableDemand,
)
from .lmo import BoundedLMO, LinearMinimizationOracle, SelfManagedLMO

# Assignment instances beyond this size are rejected rather than ground through.
HUNGARIAN_DIM_CAP = 512


def hungarian(cost, forbidden=None):
    """Minimum-cost perfect assignment on a square matrix.

    ``forbidden`` is a boolean mask of entries that may never be selected
    (kept as a mask rather than a large float to avoid overflow and spurious
    optima).  Uses the O(n^3) potentials method, augmenting one row at a time.

    Returns ``(assignment, value)`` where ``assignment[i]`` is the column
    matched to row ``i``.  Raises :class:`AssignmentInfeasible` when no
    perfect assignment avoids the forbidden entries.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    n = cost.shape[0]
    if n == 0:
        return [], 0.0
    if n > HUNGARIAN_DIM_CAP:
        raise ValueError(f"assignment dimension {n} exceeds cap {HUNGARIAN_DIM_CAP}")
    if forbidden is None:
        forbidden = np.zeros((n, n), dtype=bool)
    else:
        forbidden = np.asarray(forbidden, dtype=bool)

    inf = math.inf
    # 1-based arrays; column 0 is the virtual column holding the row being inserted.
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        way = np.zeros(n + 1, dtype=int)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            cur[forbidden[i0 - 1]] = inf
            free = ~used[1:]
            sub = minv[1:]
            improve = free & (cur < sub)
            sub[improve] = cur[improve]
            way[1:][improve] = j0
            free_idx = np.nonzero(free)[0]
            k = int(np.argmin(sub[free_idx]))
            delta = sub[free_idx[k]]
            if not math.isfinite(delta):
                raise AssignmentInfeasible(
                    "no perfect assignment avoids the forbidden entries"
                )
            j1 = int(free_idx[k]) + 1
            used_idx = np.nonzero(used)[0]
            u[p[used_idx]] += delta
            v[used_idx] -= delta
            sub[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    assignment = [0] * n
    for j in range(1, n + 1):
        assignment[p[j] - 1] = j - 1
    value = math.fsum(cost[i, assignment[i]] for i in range(n))
    return assignment, value


def knapsack_extreme_point(direction, lower, upper, budget):
    """Greedy continuous knapsack: start at the lower bounds and pour the
    remaining budget into coordinates in ascending direction order, each
    filled to its upper bound before moving on.

    The last touched coordinate may be fractional.  The result satisfies
    ``sum(x) == budget`` exactly (drift from the greedy accumulation is
    compensated onto a coordinate with slack).
    """
    direction = np.asarray(direction, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    lo_sum = math.fsum(lower)
    hi_sum = math.fsum(upper)
    if lo_sum > budget + 1e-9 or hi_sum < budget - 1e-9:
        raise BudgetInfeasible(
            f"budget {budget} outside [sum(lower), sum(upper)] = [{lo_sum}, {hi_sum}]"
        )
    x = lower.copy()
    remaining = budget - lo_sum
    order = np.argsort(direction, kind="stable")
    for i in order:
        if remaining <= 0.0:
            break
        room = upper[i] - x[i]
        if room <= 0.0:
            continue
        add = room if room < remaining else remaining
        x[i] += add
        remaining -= add
    drift = budget - math.fsum(x)
    if drift != 0.0:
        for i in order:
            if lower[i] - x[i] <= drift <= upper[i] - x[i]:
                x[i] += drift
                break
    return x


class HypercubeLMO(BoundedLMO, LinearMinimizationOracle):
    """Axis-aligned box; the extreme point picks a bound per coordinate by the
    sign of the direction (nonpositive entries pick the upper bound)."""

    def __init__(self, n, lower=None, upper=None):
        self.n = int(n)
        self.lower = np.zeros(self.n) if lower is None else np.array(lower, dtype=float)
        self.upper = np.ones(self.n) if upper is None else np.array(upper, dtype=float)
        if np.any(self.lower > self.upper):
            raise ValueError("lower bounds exceed upper bounds")

    def compute_extreme_point(self, direction):
        direction = np.asarray(direction, dtype=float)
        return np.where(direction > 0.0, self.lower, self.upper)

    def bounded_compute_extreme_point(self, direction, lower, upper, int_vars):
        direction = np.asarray(direction, dtype=float)
        v = np.where(direction > 0.0, self.lower, self.upper)
        iv = np.asarray(int_vars, dtype=int)
        v[iv] = np.where(direction[iv] > 0.0, lower, upper)
        return v

    def is_simple_linear_feasible(self, point, atol=1e-6):
        point = np.asarray(point, dtype=float)
        return bool(
            np.all(point >= self.lower - atol) and np.all(point <= self.upper + atol)
        )


class SimplexKnapsackLMO(BoundedLMO, LinearMinimizationOracle):
    """Scaled truncated probability simplex ``{0 <= x <= u, sum(x) = N}``.

    Linear minimization reduces to a continuous knapsack solved by sorting
    the direction entries.
    """

    def __init__(self, m, budget, upper=None):
        self.n = int(m)
        self.budget = float(budget)
        self.upper = (np.full(self.n, self.budget) if upper is None
                      else np.array(upper, dtype=float))
        if np.any(self.upper < 0.0):
            raise ValueError("upper bounds must be nonnegative")
        if math.fsum(self.upper) < self.budget:
            raise ValueError("sum of upper bounds is below the budget")

    def compute_extreme_point(self, direction):
        return knapsack_extreme_point(direction, np.zeros(self.n), self.upper,
                                      self.budget)

    def bounded_compute_extreme_point(self, direction, lower, upper, int_vars):
        lo = np.zeros(self.n)
        hi = self.upper.copy()
        iv = np.asarray(int_vars, dtype=int)
        lo[iv] = lower
        hi[iv] = upper
        return knapsack_extreme_point(direction, lo, hi, self.budget)

    def is_simple_linear_feasible(self, point, atol=1e-6):
        point = np.asarray(point, dtype=float)
        return bool(
            np.all(point >= -atol)
            and np.all(point <= self.upper + atol)
            and abs(math.fsum(point) - self.budget) <= atol
        )


class BirkhoffLMO(SelfManagedLMO):
    """Doubly stochastic matrices under node bounds; every extreme point is a
    permutation matrix obtained from an assignment on the reduced matrix.

    The n*n variables use column-major linear indexing: variable ``k``
    corresponds to entry ``(row k % n, col k // n)``.  Entries fixed to one
    eliminate their row and column; ``index_map_rows`` / ``index_map_cols``
    store the surviving original indices so the assignment is solved in the
    reduced dimension directly.
    """

    def __init__(self, n, atol=1e-6, rtol=1e-6):
        self.dim = int(n)
        nn = self.dim * self.dim
        self.lower_bounds = np.zeros(nn)
        self.upper_bounds = np.ones(nn)
        self.int_vars = list(range(nn))
        self.fixed_to_one_rows: list[int] = []
        self.fixed_to_one_cols: list[int] = []
        self.index_map_rows = list(range(self.dim))
        self.index_map_cols = list(range(self.dim))
        self.updated_lmo = False
        self.atol = float(atol)
        self.rtol = float(rtol)

    # -- indexing ---------------------------------------------------------

    def linear_index(self, row: int, col: int) -> int:
        return col * self.dim + row

    def row_col(self, idx: int) -> tuple[int, int]:
        return idx % self.dim, idx // self.dim

    def _flat(self, arr) -> np.ndarray:
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 2:
            return arr.ravel(order="F")
        return arr

    # -- extreme points ---------------------------------------------------

    def compute_extreme_point(self, direction):
        d = self._flat(direction)
        n = self.dim
        if len(set(self.fixed_to_one_rows)) != len(self.fixed_to_one_rows) \
                or len(set(self.fixed_to_one_cols)) != len(self.fixed_to_one_cols):
            raise AssignmentInfeasible("conflicting unit fixings in a row or column")
        M = np.zeros(n * n)
        for i, j in zip(self.fixed_to_one_rows, self.fixed_to_one_cols):
            k = self.linear_index(i, j)
            if self.upper_bounds[k] < 0.5:
                raise AssignmentInfeasible(
                    f"entry ({i}, {j}) is fixed to one but capped at zero"
                )
            M[k] = 1.0
        rows = self.index_map_rows
        cols = self.index_map_cols
        if rows:
            K = np.asarray(rows)[:, None] + n * np.asarray(cols)[None, :]
            reduced = d[K]
            forbidden = self.upper_bounds[K] < 0.5
            assignment, _ = hungarian(reduced, forbidden)
            for a, b in enumerate(assignment):
                M[self.linear_index(rows[a], cols[b])] = 1.0
        return M

    def compute_inface_extreme_point(self, direction, x):
        """Extreme point of the minimal face containing ``x``: entries of ``x``
        at one stay forced, entries at zero stay forbidden."""
        d = self._flat(direction)
        x = self._flat(x)
        n = self.dim
        pairs = list(zip(self.fixed_to_one_rows, self.fixed_to_one_cols))
        seen = set(pairs)
        for k in np.nonzero(x >= 1.0 - self.atol)[0]:
            ij = self.row_col(int(k))
            if ij not in seen:
                seen.add(ij)
                pairs.append(ij)
        rows_used = [i for i, _ in pairs]
        cols_used = [j for _, j in pairs]
        if len(set(rows_used)) != len(pairs) or len(set(cols_used)) != len(pairs):
            raise AssignmentInfeasible("iterate has conflicting unit entries")
        M = np.zeros(n * n)
        for i, j in pairs:
            M[self.linear_index(i, j)] = 1.0
        rows = [i for i in range(n) if i not in set(rows_used)]
        cols = [j for j in range(n) if j not in set(cols_used)]
        if rows:
            K = np.asarray(rows)[:, None] + n * np.asarray(cols)[None, :]
            reduced = d[K]
            forbidden = (self.upper_bounds[K] < 0.5) | (x[K] <= self.atol)
            assignment, _ = hungarian(reduced, forbidden)
            for a, b in enumerate(assignment):
                M[self.linear_index(rows[a], cols[b])] = 1.0
        return M

    def dicg_maximum_step(self, direction, x):
        """Largest ``gamma`` in [0, 1] keeping ``x - gamma * direction`` inside
        the box [0, 1]; zero when the direction pushes a boundary entry out."""
        d = self._flat(direction)
        x = self._flat(x)
        moving = d != 0.0
        if not moving.any():
            return 1.0
        at_one = x >= 1.0 - self.atol
        at_zero = x <= self.atol
        if np.any(moving & (((d < 0.0) & at_one) | ((d > 0.0) & at_zero))):
            return 0.0
        gamma = 1.0
        pos = moving & (d > 0.0)
        if pos.any():
            gamma = min(gamma, float(np.min(x[pos] / d[pos])))
        neg = moving & (d < 0.0)
        if neg.any():
            gamma = min(gamma, float(np.min((1.0 - x[neg]) / (-d[neg]))))
        return max(gamma, 0.0)

    # -- bound management --------------------------------------------------

    def build_global_bounds(self, int_vars) -> IntegerBounds:
        lower = {}
        upper = {}
        for idx, int_var in enumerate(self.int_vars):
            lower[int_var] = self.lower_bounds[idx]
            upper[int_var] = self.upper_bounds[idx]
        return IntegerBounds(lower, upper, int_vars)

    def get_bound(self, idx: int, sense: str) -> float:
        check_sense(sense)
        if sense == GREATER:
            return float(self.lower_bounds[idx])
        return float(self.upper_bounds[idx])

    def get_lower_bound_list(self):
        return self.lower_bounds.copy()

    def get_upper_bound_list(self):
        return self.upper_bounds.copy()

    def get_integer_variables(self):
        return list(self.int_vars)

    def set_bound(self, idx: int, value: float, sense: str) -> None:
        check_sense(sense)
        if self.updated_lmo:
            # First write after a node switch: the fixings of the previous
            # node are stale.
            self.fixed_to_one_rows.clear()
            self.fixed_to_one_cols.clear()
            self.updated_lmo = False
        if sense == GREATER:
            self.lower_bounds[idx] = value
            if value == 1:
                i, j = self.row_col(int(idx))
                known = zip(self.fixed_to_one_rows, self.fixed_to_one_cols)
                if (i, j) not in known:
                    self.fixed_to_one_rows.append(i)
                    self.fixed_to_one_cols.append(j)
        else:
            self.upper_bounds[idx] = value

    def delete_bounds(self, cons_delete) -> None:
        for idx, sense in cons_delete:
            check_sense(sense)
            if sense == GREATER:
                self.lower_bounds[idx] = 0.0
            else:
                self.upper_bounds[idx] = 1.0
        # The bound vectors are authoritative: re-derive the fixings so the
        # reduced state survives arbitrary set/delete sessions.
        ones = np.nonzero(self.lower_bounds == 1.0)[0]
        self.fixed_to_one_rows = [int(k) % self.dim for k in ones]
        self.fixed_to_one_cols = [int(k) // self.dim for k in ones]
        fixed_rows = set(self.fixed_to_one_rows)
        fixed_cols = set(self.fixed_to_one_cols)
        self.index_map_rows = [i for i in range(self.dim) if i not in fixed_rows]
        self.index_map_cols = [j for j in range(self.dim) if j not in fixed_cols]
        self.updated_lmo = True

    def is_linear_feasible(self, point, atol=None) -> bool:
        atol = self.atol if atol is None else atol
        x = self._flat(point)
        if x.shape[0] != self.dim * self.dim:
            return False
        if np.any(x < self.lower_bounds - atol) or np.any(x > self.upper_bounds + atol):
            return False
        X = x.reshape((self.dim, self.dim), order="F")
        return bool(
            np.all(np.abs(X.sum(axis=0) - 1.0) <= atol)
            and np.all(np.abs(X.sum(axis=1) - 1.0) <= atol)
        )

    def build_lmo_correct(self, bounds: IntegerBounds) -> bool:
        """Audit the stored state against a node's (merged) bound set."""
        for idx in range(self.dim * self.dim):
            if self.lower_bounds[idx] != bounds.lower.get(idx, 0.0):
                return False
            if self.upper_bounds[idx] != bounds.upper.get(idx, 1.0):
                return False
        pairs = sorted(
            self.row_col(int(k)) for k in np.nonzero(self.lower_bounds == 1.0)[0]
        )
        if pairs != sorted(zip(self.fixed_to_one_rows, self.fixed_to_one_cols)):
            return False
        fixed_rows = set(self.fixed_to_one_rows)
        fixed_cols = set(self.fixed_to_one_cols)
        return (
            self.index_map_rows == [i for i in range(self.dim) if i not in fixed_rows]
            and self.index_map_cols == [j for j in range(self.dim) if j not in fixed_cols]
        )


class FlowLMO(LinearMinimizationOracle):
    """Uncapacitated flow region of a traffic assignment problem.

    One flow block of ``len(arcs)`` variables per destination (destinations in
    sorted order).  Linear minimization routes every source-destination demand
    along a shortest path under the block's arc costs, which is exact because
    arcs are uncapacitated.  Negative arc costs are clamped to zero with a
    warning (the label-setting search requires nonnegative costs).
    """

    def __init__(self, num_nodes, arcs, demands):
        self.num_nodes = int(num_nodes)
        self.arcs = [(int(t), int(h)) for t, h in arcs]
        if isinstance(demands, dict):
            items = demands.items()
        else:
            items = [((int(s), int(z)), float(d)) for s, z, d in demands]
        self.demands = {}
        for (s, z), d in items:
            if d < 0:
                raise ValueError(f"demand from {s} to {z} is negative")
            if d > 0:
                self.demands[(int(s), int(z))] = self.demands.get((int(s), int(z)), 0.0) + float(d)
        self.destinations = sorted({z for (_, z) in self.demands})
        self._rev = [[] for _ in range(self.num_nodes)]
        for a, (t, h) in enumerate(self.arcs):
            self._rev[h].append((a, t))
        self._warned_negative = False
        self._check_reachability()

    def _check_reachability(self):
        for z in self.destinations:
            reached = {z}
            stack = [z]
            while stack:
                v = stack.pop()
                for _, t in self._rev[v]:
                    if t not in reached:
                        reached.add(t)
                        stack.append(t)
            for (s, dest), d in self.demands.items():
                if dest == z and s not in reached:
                    raise UnreachableDemand(
                        f"destination {z} unreachable from source {s}"
                    )

    @property
    def num_arcs(self) -> int:
        return len(self.arcs)

    @property
    def total_vars(self) -> int:
        return self.num_arcs * len(self.destinations)

    def _shortest_to(self, z, costs):
        """Distances to ``z`` and, per node, the first arc of a shortest path."""
        dist = np.full(self.num_nodes, math.inf)
        next_arc = np.full(self.num_nodes, -1, dtype=int)
        dist[z] = 0.0
        heap = [(0.0, z)]
        while heap:
            dv, v = heapq.heappop(heap)
            if dv > dist[v] + 1e-15:
                continue
            for a, t in self._rev[v]:
                nd = dv + costs[a]
                if nd < dist[t] - 1e-15:
                    dist[t] = nd
                    next_arc[t] = a
                    heapq.heappush(heap, (nd, t))
        return dist, next_arc

    def compute_extreme_point(self, direction):
        direction = np.asarray(direction, dtype=float)
        m = self.num_arcs
        flow = np.zeros(self.total_vars)
        for zi, z in enumerate(self.destinations):
            costs = direction[zi * m:(zi + 1) * m]
            if np.any(costs < 0.0):
                if not self._warned_negative:
                    warnings.warn(
                        "negative arc costs clamped to zero in the flow oracle",
                        RuntimeWarning,
                    )
                    self._warned_negative = True
                costs = np.maximum(costs, 0.0)
            _, next_arc = self._shortest_to(z, costs)
            for (s, dest), d in self.demands.items():
                if dest != z:
                    continue
                u = s
                steps = 0
                while u != z:
                    a = next_arc[u]
                    if a < 0:
                        raise UnreachableDemand(
                            f"no path from {s} to {z} under the current costs"
                        )
                    flow[zi * m + a] += d
                    u = self.arcs[a][1]
                    steps += 1
                    if steps > self.num_nodes:
                        raise UnreachableDemand(
                            f"path extraction from {s} to {z} did not terminate"
                        )
        return flow

    def is_simple_linear_feasible(self, point, atol=1e-6):
        x = np.asarray(point, dtype=float)
        if np.any(x < -atol):
            return False
        m = self.num_arcs
        for zi, z in enumerate(self.destinations):
            xz = x[zi * m:(zi + 1) * m]
            total = math.fsum(
                d for (s, dest), d in self.demands.items() if dest == z
            )
            out = np.zeros(self.num_nodes)
            inn = np.zeros(self.num_nodes)
            for a, (t, h) in enumerate(self.arcs):
                out[t] += xz[a]
                inn[h] += xz[a]
            for v in range(self.num_nodes):
                if v == z:
                    if abs(inn[v] - total) > atol:
                        return False
                elif (v, z) in self.demands:
                    if abs(out[v] - self.demands[(v, z)]) > atol:
                        return False
                else:
                    if abs(out[v] - inn[v]) > atol:
                        return False
        return True


class DesignFlowLMO(BoundedLMO):
    """Cartesian product of a 0/1 design box and a flow region.

    The feasible region of the penalized network design problem factorizes, so
    the extreme point is the concatenation of the blockwise extreme points.
    Only the design variables are integer; flows ignore integer bounds.
    """

    def __init__(self, num_designs, flow_lmo: FlowLMO):
        self.num_designs = int(num_designs)
        self.flow = flow_lmo
        self.n = self.num_designs + flow_lmo.total_vars

    def bounded_compute_extreme_point(self, direction, lower, upper, int_vars):
        direction = np.asarray(direction, dtype=float)
        r = self.num_designs
        y = np.where(direction[:r] > 0.0, 0.0, 1.0)
        iv = np.asarray(int_vars, dtype=int)
        if iv.size and (iv.min() < 0 or iv.max() >= r):
            raise ValueError("integer variables must lie in the design block")
        y[iv] = np.where(direction[iv] > 0.0, lower, upper)
        return np.concatenate([y, self.flow.compute_extreme_point(direction[r:])])

    def is_simple_linear_feasible(self, point, atol=1e-6):
        x = np.asarray(point, dtype=float)
        r = self.num_designs
        if np.any(x[:r] < -atol) or np.any(x[:r] > 1.0 + atol):
            return False
        return self.flow.is_simple_linear_feasible(x[r:], atol=atol)
