"""Shared value types: active sets, integer bound sets, and tolerance settings.

Iterates, vertices, and gradients are plain 1-D ``numpy`` arrays of float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidSense, NodeInfeasible, SplitInfeasible

# Coordinate comparisons use this tolerance unless an operation states otherwise.
ATOL = 1e-9
# Weights below this are numerically dead; cleanup removes them with their vertex.
WEIGHT_DROP_TOL = 1e-12
# A variable is considered integral when within this distance of an integer.
INT_TOL = 1e-6

GREATER = "greaterthan"
LESS = "lessthan"


def check_sense(sense: str) -> None:
    if sense not in (GREATER, LESS):
        raise InvalidSense(
            f"allowed values for sense are '{LESS}' and '{GREATER}', got {sense!r}"
        )


class ActiveSet:
    """Convex combination of vertices representing a Frank-Wolfe iterate.

    Weights are nonnegative and sum to one, vertices are pairwise distinct
    (coordinate-wise within ``ATOL``), and the set is never empty.  The solver
    mutates ``weights`` during steps and calls :meth:`cleanup` afterwards to
    restore the invariants.
    """

    __slots__ = ("vertices", "weights")

    def __init__(self, vertices, weights):
        self.vertices = [np.asarray(v, dtype=float) for v in vertices]
        self.weights = [float(w) for w in weights]
        if not self.vertices:
            raise ValueError("active set must be nonempty")
        if len(self.vertices) != len(self.weights):
            raise ValueError("vertices and weights must have the same length")

    @classmethod
    def from_point(cls, v) -> "ActiveSet":
        return cls([np.array(v, dtype=float)], [1.0])

    def __len__(self) -> int:
        return len(self.vertices)

    def copy(self) -> "ActiveSet":
        return ActiveSet([v.copy() for v in self.vertices], list(self.weights))

    def iterate(self) -> np.ndarray:
        """Weighted sum of the vertices."""
        x = self.weights[0] * self.vertices[0]
        for w, v in zip(self.weights[1:], self.vertices[1:]):
            x += w * v
        return x

    def argmin_argmax(self, direction) -> tuple[int, int]:
        """Indices of the vertices minimizing (local FW) and maximizing (away)
        the inner product with ``direction``.  Ties break to the lowest index.
        """
        dots = np.array([np.dot(direction, v) for v in self.vertices])
        return int(np.argmin(dots)), int(np.argmax(dots))

    def find(self, v) -> Optional[int]:
        """Index of a stored vertex equal to ``v`` within ``ATOL``, or None."""
        for i, u in enumerate(self.vertices):
            if np.allclose(u, v, rtol=0.0, atol=ATOL):
                return i
        return None

    def add_vertex(self, v, weight: float) -> int:
        """Add ``weight`` on vertex ``v``, merging with an existing duplicate."""
        i = self.find(v)
        if i is None:
            self.vertices.append(np.array(v, dtype=float))
            self.weights.append(float(weight))
            return len(self.vertices) - 1
        self.weights[i] += float(weight)
        return i

    def scale_weights(self, factor: float) -> None:
        for i in range(len(self.weights)):
            self.weights[i] *= factor

    def cleanup(self) -> list[np.ndarray]:
        """Drop numerically dead vertices and renormalize; returns the dropped
        vertices so callers can recycle them (shadow pool)."""
        dropped = []
        keep_v, keep_w = [], []
        for v, w in zip(self.vertices, self.weights):
            if w < WEIGHT_DROP_TOL:
                dropped.append(v)
            else:
                keep_v.append(v)
                keep_w.append(w)
        if not keep_v:
            # Degenerate: keep the heaviest vertex rather than emptying the set.
            i = int(np.argmax(self.weights))
            keep_v = [self.vertices[i]]
            keep_w = [1.0]
            dropped = [v for j, v in enumerate(self.vertices) if j != i]
        total = math.fsum(keep_w)
        self.vertices = keep_v
        self.weights = [w / total for w in keep_w]
        return dropped

    def split(self, var: int, floor_val: float, ceil_val: float
              ) -> tuple["ActiveSet", "ActiveSet"]:
        """Partition the vertices by their (integral) value in coordinate
        ``var``: left gets ``v[var] <= floor_val``, right gets
        ``v[var] >= ceil_val``.  Weights in each child are renormalized.
        """
        mid = 0.5 * (floor_val + ceil_val)
        left_v, left_w, right_v, right_w = [], [], [], []
        for v, w in zip(self.vertices, self.weights):
            val = float(v[var])
            if abs(val - round(val)) > INT_TOL:
                raise SplitInfeasible(
                    f"vertex has fractional value {val} in coordinate {var}"
                )
            if val < mid:
                left_v.append(v.copy())
                left_w.append(w)
            else:
                right_v.append(v.copy())
                right_w.append(w)
        if not left_v or not right_v:
            raise SplitInfeasible(
                f"split on coordinate {var} produced an empty child"
            )
        lsum, rsum = math.fsum(left_w), math.fsum(right_w)
        left = ActiveSet(left_v, [w / lsum for w in left_w])
        right = ActiveSet(right_v, [w / rsum for w in right_w])
        return left, right


class IntegerBounds:
    """Per-variable lower/upper bounds restricting the integer variables.

    Keys of both maps must be integer variables; a variable present in both
    maps satisfies ``lower <= upper``.
    """

    __slots__ = ("lower", "upper", "int_vars")

    def __init__(self, lower=None, upper=None, int_vars=()):
        self.lower = {int(k): float(v) for k, v in dict(lower or {}).items()}
        self.upper = {int(k): float(v) for k, v in dict(upper or {}).items()}
        self.int_vars = tuple(sorted(int(i) for i in int_vars))
        allowed = set(self.int_vars)
        for name, mapping in (("lower", self.lower), ("upper", self.upper)):
            for k in mapping:
                if k not in allowed:
                    raise ValueError(f"{name} bound on non-integer variable {k}")
        for k in self.lower.keys() & self.upper.keys():
            if self.lower[k] > self.upper[k] + 1e-12:
                raise NodeInfeasible(
                    f"variable {k}: lower bound {self.lower[k]} exceeds "
                    f"upper bound {self.upper[k]}"
                )

    def copy(self) -> "IntegerBounds":
        return IntegerBounds(self.lower, self.upper, self.int_vars)

    def get(self, idx: int, sense: str, default=None):
        check_sense(sense)
        mapping = self.lower if sense == GREATER else self.upper
        return mapping.get(int(idx), default)

    def tighten(self, idx: int, value: float, sense: str) -> "IntegerBounds":
        """New bound set with ``value`` merged in; never widens an interval."""
        check_sense(sense)
        lower, upper = dict(self.lower), dict(self.upper)
        idx = int(idx)
        if sense == GREATER:
            lower[idx] = max(lower.get(idx, -math.inf), float(value))
        else:
            upper[idx] = min(upper.get(idx, math.inf), float(value))
        return IntegerBounds(lower, upper, self.int_vars)

    def merged_over(self, fallback: "IntegerBounds") -> "IntegerBounds":
        """Bounds of ``self`` overriding ``fallback`` where present."""
        lower = dict(fallback.lower)
        lower.update(self.lower)
        upper = dict(fallback.upper)
        upper.update(self.upper)
        int_vars = self.int_vars if self.int_vars else fallback.int_vars
        return IntegerBounds(lower, upper, int_vars)

    def contains(self, x, atol: float = INT_TOL) -> bool:
        for k, lb in self.lower.items():
            if x[k] < lb - atol:
                return False
        for k, ub in self.upper.items():
            if x[k] > ub + atol:
                return False
        return True

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntegerBounds):
            return NotImplemented
        return (self.lower == other.lower and self.upper == other.upper
                and self.int_vars == other.int_vars)

    def __repr__(self) -> str:
        return (f"IntegerBounds(lower={self.lower!r}, upper={self.upper!r}, "
                f"int_vars={self.int_vars!r})")


@dataclass
class Tolerances:
    """Termination and node-tolerance settings.

    ``node_epsilon`` implements the depth-adaptive Frank-Wolfe tolerance:
    loose near the root, tightened geometrically down the tree.
    """

    abs_gap: float = 1e-6
    rel_gap: float = 0.01
    fw_gap_decay: float = 0.8
    fw_epsilon_start: float = 1e-2
    fw_epsilon_min: float = 1e-6
    min_lower_bound: Optional[float] = None
    max_fw_iter: int = 10000
    node_limit: Optional[int] = None
    time_limit_s: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.fw_gap_decay < 1.0):
            raise ValueError("fw_gap_decay must lie strictly between 0 and 1")
        if self.fw_epsilon_min > self.fw_epsilon_start:
            raise ValueError("fw_epsilon_min must not exceed fw_epsilon_start")
        if self.abs_gap <= 0.0:
            raise ValueError("abs_gap must be positive")

    def node_epsilon(self, depth: int) -> float:
        return max(self.fw_epsilon_min, self.fw_epsilon_start * self.fw_gap_decay ** depth)

    def gap_threshold(self, ub: float) -> float:
        if not math.isfinite(ub):
            return self.abs_gap
        return max(self.abs_gap, self.rel_gap * abs(ub))

    @staticmethod
    def relative_gap(ub: float, lb: float) -> float:
        if not (math.isfinite(ub) and math.isfinite(lb)):
            return math.inf
        return (ub - lb) / max(abs(ub), 1e-10)
