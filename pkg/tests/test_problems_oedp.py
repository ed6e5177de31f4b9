import itertools
import math

import numpy as np
import pytest

from branchwolfe.bnb import SolvingStage, solve
from branchwolfe.core import IntegerBounds
from branchwolfe.errors import DomainViolation
from branchwolfe.problems import experiment_design as oed

from conftest import assert_gradient_matches


def identity_problem(n):
    return np.eye(n)


# -- objectives -----------------------------------------------------------------


def test_a_criterion_identity_design():
    n = 4
    A = identity_problem(n)
    f, grad = oed.make_objective(A, oed.Criterion.A)
    x = np.ones(n)
    assert f(x) == pytest.approx(float(n), abs=1e-12)
    g = np.empty(n)
    grad(g, x)
    np.testing.assert_allclose(g, -1.0, atol=1e-12)


def test_d_criterion_identity_design():
    n = 4
    A = identity_problem(n)
    f, grad = oed.make_objective(A, oed.Criterion.D)
    x = np.ones(n)
    assert f(x) == pytest.approx(0.0, abs=1e-12)
    g = np.empty(n)
    grad(g, x)
    np.testing.assert_allclose(g, -1.0, atol=1e-12)


def test_objectives_raise_outside_domain():
    A = np.eye(3)
    f, grad = oed.make_objective(A, oed.Criterion.A)
    with pytest.raises(DomainViolation):
        f(np.zeros(3))
    with pytest.raises(DomainViolation):
        grad(np.empty(3), np.array([1.0, 1.0, 0.0]))


def test_gradients_match_finite_differences(rng):
    m, n = 9, 3
    A = rng.normal(size=(m, n))
    for criterion in (oed.Criterion.A, oed.Criterion.D):
        f, grad = oed.make_objective(A, criterion)
        for _ in range(5):
            x = rng.uniform(0.5, 2.0, size=m)
            assert_gradient_matches(f, grad, x)


def test_objectives_convex_along_segments(rng):
    m, n = 8, 3
    A = rng.normal(size=(m, n))
    oracle = oed.make_domain_oracle(A)
    for criterion in (oed.Criterion.A, oed.Criterion.D):
        f, _ = oed.make_objective(A, criterion)
        for _ in range(30):
            x = rng.uniform(0.5, 2.0, size=m)
            y = rng.uniform(0.5, 2.0, size=m)
            assert oracle(x) and oracle(y)
            for t in (0.25, 0.5, 0.75):
                mid = t * x + (1 - t) * y
                assert f(mid) <= t * f(x) + (1 - t) * f(y) + 1e-8


# -- domain oracle -----------------------------------------------------------------


def test_domain_oracle_zero_point():
    oracle = oed.make_domain_oracle(np.eye(3))
    assert not oracle(np.zeros(3))


def test_domain_oracle_independent_rows(rng):
    m, n = 6, 3
    A = rng.normal(size=(m, n))
    oracle = oed.make_domain_oracle(A)
    x = np.zeros(m)
    x[:n] = 1.0  # first n rows are independent with probability one
    assert oracle(x)


def test_domain_oracle_rank_deficiency():
    # two active experiments cannot identify three parameters
    A = np.vstack([np.eye(3), np.eye(3)])
    oracle = oed.make_domain_oracle(A)
    x = np.array([1.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    assert not oracle(x)


# -- domain point generation ----------------------------------------------------------


def root_bounds(m, upper):
    return IntegerBounds({i: 0.0 for i in range(m)},
                         {i: float(upper[i]) for i in range(m)}, int_vars=range(m))


def test_domain_point_square_invertible_budget_n():
    n = 4
    A = identity_problem(n)
    dp = oed.make_domain_point(A, float(n), np.full(n, float(n)))
    x = dp(root_bounds(n, np.full(n, n)))
    np.testing.assert_array_equal(x, np.ones(n))


def test_domain_point_infeasible_lower_bounds():
    A = identity_problem(3)
    dp = oed.make_domain_point(A, 3.0, np.full(3, 3.0))
    bounds = IntegerBounds({0: 2.0, 1: 2.0}, {}, int_vars=range(3))
    assert dp(bounds) is None


def test_domain_point_infeasible_upper_bounds():
    # capping all but two experiments at zero leaves a rank-two matrix
    A = np.vstack([np.eye(3), np.eye(3)])
    dp = oed.make_domain_point(A, 3.0, np.full(6, 3.0))
    bounds = IntegerBounds({}, {2: 0.0, 5: 0.0}, int_vars=range(6))
    assert dp(bounds) is None


def test_domain_point_random_properties(rng):
    m, n, budget = 10, 3, 5
    A = rng.normal(size=(m, n))
    upper = np.full(m, 2.0)
    dp = oed.make_domain_point(A, float(budget), upper)
    oracle = oed.make_domain_oracle(A)
    for _ in range(25):
        lower_map, upper_map = {}, {}
        for i in rng.choice(m, size=3, replace=False):
            if rng.random() < 0.5:
                lower_map[int(i)] = 1.0
            else:
                upper_map[int(i)] = float(rng.integers(0, 2))
        bounds = IntegerBounds(lower_map, upper_map, int_vars=range(m))
        merged_lower = np.array([bounds.lower.get(i, 0.0) for i in range(m)])
        merged_upper = np.array([min(bounds.upper.get(i, upper[i]), upper[i])
                                 for i in range(m)])
        x = dp(bounds)
        if x is None:
            continue
        assert math.fsum(x) == pytest.approx(budget, abs=1e-9)
        assert np.all(x >= merged_lower - 1e-9)
        assert np.all(x <= merged_upper + 1e-9)
        assert oracle(x)
        assert np.all(x == np.rint(x))


def test_linearly_independent_rows_greedy():
    A = np.array([
        [1.0, 0.0],
        [2.0, 0.0],   # dependent on row 0
        [0.0, 1.0],
    ])
    assert oed.linearly_independent_rows(A, [True, True, True]) == [0, 2]
    assert oed.linearly_independent_rows(A, [False, True, True]) == [1, 2]


# -- end-to-end -----------------------------------------------------------------------


def enumerate_optimum(problem, m, budget, upper):
    best = math.inf
    for point in itertools.product(*(range(int(u) + 1) for u in upper)):
        if sum(point) != budget:
            continue
        x = np.array(point, dtype=float)
        if not problem.domain_oracle(x):
            continue
        best = min(best, problem.f(x))
    return best


@pytest.mark.parametrize("criterion", [oed.Criterion.A, oed.Criterion.D])
def test_solve_matches_enumeration(criterion, rng):
    m, n, budget = 9, 3, 4
    A = rng.normal(size=(m, n))
    upper = np.full(m, 2.0)
    problem = oed.build_problem(A, budget, upper, criterion)
    best = enumerate_optimum(problem, m, budget, upper)
    settings = oed.default_settings(problem)
    x, _, result = solve(problem, settings)
    assert result["status"] == SolvingStage.OPTIMAL_REACHED
    assert result["upper_bound"] == pytest.approx(best, abs=1e-5)
    assert math.fsum(x) == pytest.approx(budget, abs=1e-9)
    assert problem.domain_oracle(x)


def test_generate_instance_full_rank():
    data = oed.generate_instance(m=12, n=4, budget=6, seed=3)
    A = np.asarray(data["matrix"])
    assert np.linalg.matrix_rank(A) == 4
    assert sum(data["upper_bounds"]) >= data["budget"]
