"""Optimal experiment design over a scaled truncated simplex.

Select integer repetition counts ``x`` for the rows of an experiment matrix A
under a total budget; the objectives act on the information matrix
``X(x) = A^T diag(x) A`` and are only defined where it is positive definite,
so the pack supplies a domain oracle, a domain-point generator for node warm
starts, and a projection-based start procedure.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Optional

import numpy as np

from ..bnb import ProblemSpec
from ..core import ActiveSet, IntegerBounds
from ..errors import DomainViolation
from ..fw import Secant, domain_warm_start
from ..lmo import ManagedLMO
from ..polytopes import SimplexKnapsackLMO
from ..settings import Settings, create_default_settings


class Criterion(Enum):
    A = "A"
    D = "D"


def information_matrix(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    return A.T @ (np.asarray(x, dtype=float)[:, None] * A)


def make_domain_oracle(A: np.ndarray):
    """True iff the symmetrized information matrix factors with positive
    pivots, i.e. is positive definite."""
    A = np.asarray(A, dtype=float)

    def domain_oracle(x) -> bool:
        X = information_matrix(A, x)
        X = 0.5 * (X + X.T)
        if not np.all(np.isfinite(X)):
            return False
        try:
            np.linalg.cholesky(X)
        except np.linalg.LinAlgError:
            return False
        return True

    return domain_oracle


def make_objective(A: np.ndarray, criterion: Criterion):
    """Objective and gradient for the chosen information criterion.

    A-criterion: trace of the inverse information matrix,
    gradient entries ``-||X^-1 a_i||^2``.
    D-criterion: negative log-determinant, gradient entries
    ``-a_i^T X^-1 a_i``.  Everything goes through a Cholesky factor; the
    log-determinant is accumulated from the factor's diagonal to avoid
    overflow.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    eye = np.eye(n)

    def factor(x):
        X = information_matrix(A, x)
        X = 0.5 * (X + X.T)
        try:
            return np.linalg.cholesky(X)
        except np.linalg.LinAlgError as exc:
            raise DomainViolation("information matrix is not positive definite") from exc

    def inv_apply(L, rhs):
        # X^-1 rhs via the two triangular solves of the factorization
        y = np.linalg.solve(L, rhs)
        return np.linalg.solve(L.T, y)

    if criterion == Criterion.A:

        def f(x):
            L = factor(x)
            return float(np.trace(inv_apply(L, eye)))

        def grad(storage, x):
            L = factor(x)
            S = inv_apply(L, A.T)  # columns are X^-1 a_i
            storage[:] = -(S * S).sum(axis=0)

    else:

        def f(x):
            L = factor(x)
            return float(-2.0 * np.sum(np.log(np.diag(L))))

        def grad(storage, x):
            L = factor(x)
            S = inv_apply(L, A.T)
            storage[:] = -(A * S.T).sum(axis=1)

    return f, grad


def linearly_independent_rows(A: np.ndarray, allowed) -> list[int]:
    """Greedy ascending scan collecting rows that extend the span."""
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    basis: list[np.ndarray] = []
    chosen: list[int] = []
    for i in range(A.shape[0]):
        if not allowed[i]:
            continue
        v = A[i].astype(float).copy()
        for b in basis:
            v -= np.dot(v, b) * b
        norm = float(np.linalg.norm(v))
        if norm > 1e-10 * max(1.0, float(np.linalg.norm(A[i]))):
            basis.append(v / norm)
            chosen.append(i)
        if len(chosen) == n:
            break
    return chosen


def make_domain_point(A: np.ndarray, budget: float, upper: np.ndarray):
    """Domain-point generator for a node's merged bounds.

    Starts from the node lower bounds, then adds unit experiments: first to
    the smallest entry among a set of linearly independent rows, then (once
    those are exhausted) to the smallest entry overall, until the budget is
    met.  Returns None when the node cannot contain a domain-feasible point.
    """
    A = np.asarray(A, dtype=float)
    upper = np.asarray(upper, dtype=float)
    m, n = A.shape
    domain_oracle = make_domain_oracle(A)

    def add_to_min(x, ub, indices) -> bool:
        best = None
        for i in indices:
            if x[i] < ub[i] - 1e-9:
                if best is None or x[i] < x[best] - 1e-12:
                    best = i
        if best is None:
            return False
        x[best] += 1.0
        return True

    def domain_point(bounds: IntegerBounds) -> Optional[np.ndarray]:
        lb = np.zeros(m)
        ub = upper.copy()
        for i, v in bounds.lower.items():
            lb[i] = max(lb[i], v)
        for i, v in bounds.upper.items():
            ub[i] = min(ub[i], v)
        if math.fsum(lb) > budget + 1e-9 or not domain_oracle(ub):
            return None
        x = lb.copy()
        independent = linearly_independent_rows(A, ub > 0.0)
        if len(independent) < n:
            return None
        all_indices = range(m)
        while True:
            total = math.fsum(x)
            if total > budget + 1e-9:
                return None
            if abs(total - budget) <= 1e-9:
                return x if domain_oracle(x) else None
            if not add_to_min(x, ub, independent):
                if not add_to_min(x, ub, all_indices):
                    return None

    return domain_point


def warm_start_active_set(lmo, x0, domain_oracle, extra_iters: int = 5) -> ActiveSet:
    """Projection-based start: minimize the distance to the domain point and
    keep iterating a few steps after the iterate enters the domain."""
    return domain_warm_start(lmo, x0, domain_oracle, extra_iters=extra_iters)


def build_problem(A, budget, upper=None,
                  criterion: Criterion = Criterion.A) -> ProblemSpec:
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if np.linalg.matrix_rank(A) < n:
        raise ValueError("experiment matrix must have full column rank")
    if budget < n:
        raise ValueError("budget must cover at least n experiments")
    upper = (np.full(m, float(budget)) if upper is None
             else np.asarray(upper, dtype=float))
    if math.fsum(upper) < budget:
        raise ValueError("upper bounds cannot meet the budget")
    inner = SimplexKnapsackLMO(m, budget, upper)
    lmo = ManagedLMO(inner, np.zeros(m), upper, range(m), m)
    f, grad = make_objective(A, criterion)
    return ProblemSpec(
        f=f, grad=grad, lmo=lmo, n=m,
        domain_oracle=make_domain_oracle(A),
        find_domain_point=make_domain_point(A, budget, upper),
        simplex_budget=float(budget),
        name=f"experiment_design_{criterion.value}",
    )


def default_settings(problem: ProblemSpec, verbose: bool = False) -> Settings:
    """Pack defaults: domain-aware secant line search, lazification, the
    hyperplane-aware rounding heuristic, and a projection-built start."""
    settings = create_default_settings()
    settings.branch_and_bound.verbose = verbose
    settings.frank_wolfe.lazy = True
    settings.frank_wolfe.line_search = Secant(domain_oracle=problem.domain_oracle)
    settings.heuristic.hyperplane_aware_rounding_prob = 0.7
    settings.domain.domain_oracle = problem.domain_oracle
    settings.domain.find_domain_point = problem.find_domain_point
    root_bounds = problem.lmo.merged_bounds()
    x0 = problem.find_domain_point(root_bounds)
    if x0 is None:
        raise ValueError("instance admits no domain-feasible point")
    settings.domain.active_set = warm_start_active_set(
        problem.lmo, x0, problem.domain_oracle
    )
    return settings


def generate_instance(m: int = 20, n: int = 4, budget: Optional[int] = None,
                      seed: int = 0, criterion: str = "A") -> dict:
    """Gaussian experiment matrix with integer upper bounds; the matrix is
    resampled until it has full column rank."""
    rng = np.random.default_rng(seed)
    budget = int(budget) if budget is not None else max(n + 1, round(1.5 * n))
    for _ in range(100):
        A = rng.normal(size=(m, n))
        if np.linalg.matrix_rank(A) == n:
            break
    else:
        raise RuntimeError("failed to sample a full-rank matrix")
    upper = rng.integers(1, 4, size=m)
    while int(upper.sum()) < budget:
        upper[int(rng.integers(0, m))] += 1
    return {
        "kind": "experiment_design",
        "criterion": str(criterion),
        "matrix": [[float(v) for v in row] for row in A],
        "budget": budget,
        "upper_bounds": [int(u) for u in upper],
    }
