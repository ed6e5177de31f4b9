"""Primal heuristics producing integer-feasible candidates from fractional
node iterates.

Each heuristic has an activation probability; the driver draws one uniform
number per node per heuristic from a single seeded stream and runs the
heuristic when the draw falls below its probability.  Candidates returned
here have already passed the region's feasibility check; the tree still
re-validates integrality and domain membership before accepting them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np


class HeuristicKind(Enum):
    SIMPLE_ROUNDING = "simple_rounding"
    PROBABILITY_ROUNDING = "probability_rounding"
    FOLLOW_GRADIENT = "follow_gradient"
    HYPERPLANE_AWARE_ROUNDING = "hyperplane_aware_rounding"


@dataclass
class HeuristicConfig:
    kind: HeuristicKind
    activation_prob: float
    run: Optional[Callable] = None  # custom heuristics supply their own callable
    name: str = ""


def _round_half_away(values: np.ndarray) -> np.ndarray:
    return np.copysign(np.floor(np.abs(values) + 0.5), values)


def simple_rounding(x, int_vars, lower, upper, is_feasible):
    """Round each integer coordinate to the nearest integer (halves away from
    zero), clamp into the node bounds, and accept iff the point is feasible."""
    cand = np.array(x, dtype=float)
    iv = np.asarray(int_vars, dtype=int)
    cand[iv] = np.clip(_round_half_away(cand[iv]), lower, upper)
    if is_feasible(cand):
        return cand
    return None


def probability_rounding(x, int_vars, rng, is_feasible):
    """Set each binary variable to one with probability equal to its
    fractional value.  Requires binary bounds at the node."""
    cand = np.array(x, dtype=float)
    iv = np.asarray(int_vars, dtype=int)
    draws = rng.random(iv.shape[0])
    cand[iv] = (draws < cand[iv]).astype(float)
    if is_feasible(cand):
        return cand
    return None


def follow_gradient(x, f, grad, extreme_point, steps, domain_oracle=None):
    """Chase the gradient through the oracle: each step calls the oracle on
    the gradient at the current point and keeps the best objective value."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    current = np.asarray(x, dtype=float)
    storage = np.empty_like(current)
    best = None
    best_val = math.inf
    for _ in range(steps):
        grad(storage, current)
        vertex = extreme_point(storage)
        if domain_oracle is not None and not domain_oracle(vertex):
            break
        val = float(f(vertex))
        if val < best_val:
            best, best_val = vertex, val
        current = vertex
    return best


def hyperplane_aware_rounding(x, int_vars, budget, upper, is_feasible):
    """Rounding that preserves a budget hyperplane ``sum(x) = N``: floor all
    integer coordinates, then hand the residual budget unit by unit to the
    coordinates with the largest fractional parts that still have room."""
    cand = np.array(x, dtype=float)
    iv = np.asarray(int_vars, dtype=int)
    fractional = cand[iv] - np.floor(cand[iv])
    cand[iv] = np.floor(cand[iv])
    residual = int(round(budget - math.fsum(cand[iv])))
    if residual < 0:
        return None
    # Fixed priority: largest fractional part first, ties to the lowest index.
    # A coordinate keeps receiving units until its upper bound blocks it.
    order = np.argsort(-fractional, kind="stable")
    for _ in range(residual):
        placed = False
        for k in order:
            if cand[iv[k]] + 1.0 <= upper[k] + 1e-9:
                cand[iv[k]] += 1.0
                placed = True
                break
        if not placed:
            # BudgetUnrestorable: the upper bounds block redistribution.
            return None
    if is_feasible(cand):
        return cand
    return None
