"""Oracle contracts for feasible regions, plus the framework-managed bound
wrapper and the instrumentation wrapper.

Two pathways are supported.  A :class:`BoundedLMO` only knows how to minimize
under explicitly supplied integer bounds; the framework stores and merges the
bounds (wrap it in :class:`ManagedLMO`).  A :class:`SelfManagedLMO` stores its
own bound state and exposes read/set/delete operations, which pays off when a
bound change restructures the oracle (e.g. eliminating rows and columns).
"""

from __future__ import annotations

import time

import numpy as np

from .core import GREATER, LESS, IntegerBounds
from .errors import NodeInfeasible


class LinearMinimizationOracle:
    """Minimal oracle contract: return a vertex minimizing a linear function."""

    def compute_extreme_point(self, direction: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class BoundedLMO:
    """Oracle for the framework-managed pathway.

    ``bounded_compute_extreme_point`` receives the merged node bounds aligned
    with ``int_vars`` and must return a vertex that is integral on the integer
    variables and respects those bounds.  ``is_simple_linear_feasible`` checks
    the non-bound constraints of the region.
    """

    #: total number of variables
    n: int

    def bounded_compute_extreme_point(self, direction, lower, upper, int_vars):
        raise NotImplementedError

    def is_simple_linear_feasible(self, point) -> bool:
        raise NotImplementedError


class SelfManagedLMO(LinearMinimizationOracle):
    """Oracle for the fully self-managed pathway.

    After any sequence of ``set_bound`` / ``delete_bounds`` calls,
    ``compute_extreme_point`` must respect exactly the stored bounds.
    """

    def build_global_bounds(self, int_vars) -> IntegerBounds:
        raise NotImplementedError

    def get_bound(self, idx: int, sense: str) -> float:
        raise NotImplementedError

    def get_lower_bound_list(self):
        raise NotImplementedError

    def get_upper_bound_list(self):
        raise NotImplementedError

    def get_integer_variables(self):
        raise NotImplementedError

    def set_bound(self, idx: int, value: float, sense: str) -> None:
        raise NotImplementedError

    def delete_bounds(self, cons_delete) -> None:
        raise NotImplementedError

    def is_linear_feasible(self, point) -> bool:
        raise NotImplementedError

    # Optional: consistency audit of the stored state against node bounds.
    def build_lmo_correct(self, bounds: IntegerBounds) -> bool:
        return True


def managed_compute_extreme_point(lmo: BoundedLMO, node_bounds: IntegerBounds,
                                  global_bounds: IntegerBounds,
                                  direction: np.ndarray) -> np.ndarray:
    """Merge node bounds over global bounds and delegate to the inner oracle.

    Node bounds win where present.  Raises :class:`NodeInfeasible` when the
    merged interval of some variable is empty, before the oracle is called.
    """
    direction = np.asarray(direction, dtype=float)
    if np.isnan(direction).any():
        raise ValueError("direction contains NaN entries")
    int_vars = global_bounds.int_vars
    lower = np.empty(len(int_vars))
    upper = np.empty(len(int_vars))
    for k, i in enumerate(int_vars):
        lo = node_bounds.lower.get(i, global_bounds.lower[i])
        hi = node_bounds.upper.get(i, global_bounds.upper[i])
        if lo > hi + 1e-12:
            raise NodeInfeasible(f"variable {i}: merged bounds [{lo}, {hi}] are empty")
        lower[k] = lo
        upper[k] = hi
    return lmo.bounded_compute_extreme_point(direction, lower, upper, int_vars)


class ManagedLMO(LinearMinimizationOracle):
    """Bound management on top of a :class:`BoundedLMO`.

    Stores the global integer bounds once; the branch-and-bound driver installs
    the current node's bounds with :meth:`set_node_bounds` and every extreme
    point computation merges them on the fly.
    """

    def __init__(self, inner: BoundedLMO, lower_bounds, upper_bounds, int_vars,
                 n: int):
        self.inner = inner
        self.n = int(n)
        int_vars = tuple(sorted(int(i) for i in int_vars))
        lower = {i: float(lo) for i, lo in zip(int_vars, np.asarray(lower_bounds, dtype=float))}
        upper = {i: float(hi) for i, hi in zip(int_vars, np.asarray(upper_bounds, dtype=float))}
        self.global_bounds = IntegerBounds(lower, upper, int_vars)
        self.node_bounds = IntegerBounds(int_vars=int_vars)

    @property
    def int_vars(self):
        return self.global_bounds.int_vars

    def set_node_bounds(self, bounds: IntegerBounds) -> None:
        self.node_bounds = bounds

    def merged_bounds(self) -> IntegerBounds:
        return self.node_bounds.merged_over(self.global_bounds)

    def compute_extreme_point(self, direction) -> np.ndarray:
        return managed_compute_extreme_point(
            self.inner, self.node_bounds, self.global_bounds, direction
        )

    def is_linear_feasible(self, point, atol: float = 1e-6) -> bool:
        merged = self.merged_bounds()
        return merged.contains(point, atol) and self.inner.is_simple_linear_feasible(point)


class TimeTrackingLMO:
    """Transparent wrapper counting extreme-point computations and their time.

    Everything else is delegated to the wrapped oracle, so the wrapper can sit
    in front of either pathway without changing results.
    """

    def __init__(self, inner):
        self.inner = inner
        self.call_count = 0
        self.total_time_s = 0.0

    def _timed(self, fn, *args, **kwargs):
        start = time.monotonic()
        try:
            return fn(*args, **kwargs)
        finally:
            self.total_time_s += time.monotonic() - start
            self.call_count += 1

    def compute_extreme_point(self, direction):
        return self._timed(self.inner.compute_extreme_point, direction)

    def bounded_compute_extreme_point(self, direction, lower, upper, int_vars):
        return self._timed(
            self.inner.bounded_compute_extreme_point, direction, lower, upper, int_vars
        )

    def compute_inface_extreme_point(self, direction, x):
        return self._timed(self.inner.compute_inface_extreme_point, direction, x)

    def __getattr__(self, name):
        return getattr(self.inner, name)
