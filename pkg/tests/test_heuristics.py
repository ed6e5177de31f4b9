import math

import numpy as np
import pytest

from branchwolfe.bnb import ProblemSpec, solve
from branchwolfe.heuristics import (
    follow_gradient,
    hyperplane_aware_rounding,
    probability_rounding,
    simple_rounding,
)
from branchwolfe.lmo import ManagedLMO
from branchwolfe.polytopes import BirkhoffLMO, HypercubeLMO, SimplexKnapsackLMO
from branchwolfe.settings import create_default_settings

from conftest import quad_oracles, random_psd_quadratic


def always_feasible(x):
    return True


# -- simple rounding -----------------------------------------------------------


def test_simple_rounding_integral_unchanged():
    x = np.array([1.0, 0.0, 2.0])
    out = simple_rounding(x, [0, 1, 2], np.zeros(3), np.full(3, 2.0), always_feasible)
    np.testing.assert_array_equal(out, x)


def test_simple_rounding_nearest():
    out = simple_rounding(np.array([0.4, 0.6]), [0, 1], np.zeros(2), np.ones(2),
                          always_feasible)
    np.testing.assert_array_equal(out, [0.0, 1.0])


def test_simple_rounding_half_away_from_zero():
    out = simple_rounding(np.array([0.5, 1.5]), [0, 1], np.zeros(2), np.full(2, 2.0),
                          always_feasible)
    np.testing.assert_array_equal(out, [1.0, 2.0])


def test_simple_rounding_rejected_when_infeasible():
    lmo = BirkhoffLMO(3)
    # the uniform doubly stochastic matrix rounds to all zeros
    x = np.full(9, 1.0 / 3.0)
    out = simple_rounding(x, list(range(9)), np.zeros(9), np.ones(9),
                          lmo.is_linear_feasible)
    assert out is None


# -- probability rounding --------------------------------------------------------


def test_probability_rounding_binary_unchanged(rng):
    x = np.array([1.0, 0.0, 1.0])
    out = probability_rounding(x, [0, 1, 2], rng, always_feasible)
    np.testing.assert_array_equal(out, x)


def test_probability_rounding_reproducible():
    x = np.full(6, 0.5)
    a = probability_rounding(x, range(6), np.random.default_rng(3), always_feasible)
    b = probability_rounding(x, range(6), np.random.default_rng(3), always_feasible)
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(a)) <= {0.0, 1.0}


def test_probability_rounding_infeasible_returns_none(rng):
    out = probability_rounding(np.array([1.0, 1.0]), [0, 1], rng, lambda x: False)
    assert out is None


# -- follow the gradient ----------------------------------------------------------


def test_follow_gradient_linear_one_step():
    c = np.array([1.0, -1.0, 2.0])

    def f(x):
        return float(c @ x)

    def grad(storage, x):
        storage[:] = c

    lmo = HypercubeLMO(3)
    out = follow_gradient(np.full(3, 0.5), f, grad, lmo.compute_extreme_point, 1)
    np.testing.assert_array_equal(out, lmo.compute_extreme_point(c))


def test_follow_gradient_one_step_is_single_lmo_call():
    calls = []

    def f(x):
        return float(x @ x)

    def grad(storage, x):
        storage[:] = 2.0 * x

    def extreme_point(d):
        calls.append(d.copy())
        return np.zeros(2)

    follow_gradient(np.array([0.7, 0.7]), f, grad, extreme_point, 1)
    assert len(calls) == 1


def test_follow_gradient_reaches_integral_optimum(rng):
    n = 3
    Q, b = random_psd_quadratic(rng, n)
    target = np.array([1.0, 0.0, 1.0])
    b = -Q @ target  # integral unconstrained optimum
    f, grad = quad_oracles(Q, b)
    lmo = HypercubeLMO(n)
    out = follow_gradient(np.full(n, 0.5), f, grad, lmo.compute_extreme_point, 3)
    import itertools
    best = min(f(np.array(p, dtype=float))
               for p in itertools.product((0.0, 1.0), repeat=n))
    assert f(out) == pytest.approx(best, abs=1e-9)


def test_follow_gradient_requires_steps():
    with pytest.raises(ValueError):
        follow_gradient(np.zeros(2), lambda x: 0.0, lambda s, x: None,
                        lambda d: np.zeros(2), 0)


# -- hyperplane-aware rounding -----------------------------------------------------


def test_hyperplane_rounding_tie_lowest_index():
    out = hyperplane_aware_rounding(np.array([1.5, 1.5]), [0, 1], 3.0,
                                    np.full(2, 2.0), always_feasible)
    np.testing.assert_array_equal(out, [2.0, 1.0])


def test_hyperplane_rounding_integral_unchanged():
    x = np.array([2.0, 1.0, 0.0])
    out = hyperplane_aware_rounding(x, [0, 1, 2], 3.0, np.full(3, 2.0),
                                    always_feasible)
    np.testing.assert_array_equal(out, x)


def test_hyperplane_rounding_blocked_by_upper_bounds():
    out = hyperplane_aware_rounding(np.array([0.5, 0.5]), [0, 1], 4.0,
                                    np.ones(2), always_feasible)
    assert out is None


def test_hyperplane_rounding_property(rng):
    m, budget = 6, 5.0
    upper = np.full(m, 3.0)
    lmo = SimplexKnapsackLMO(m, budget, upper)
    for _ in range(30):
        raw = rng.random(m)
        x = budget * raw / raw.sum()
        out = hyperplane_aware_rounding(x, range(m), budget, upper,
                                        lmo.is_simple_linear_feasible)
        assert out is not None
        assert math.fsum(out) == pytest.approx(budget, abs=1e-9)
        assert np.all(out >= -1e-9) and np.all(out <= upper + 1e-9)
        assert np.all(out == np.rint(out))


# -- activation behavior ------------------------------------------------------------


def test_activation_probabilities_statistical(rng):
    # p = 0 never fires, p = 1 always fires, p = 0.3 lands in the 3-sigma band
    draws = rng.random(1000)
    assert np.sum(draws < 0.0) == 0
    assert np.sum(draws < 1.0) == 1000
    hits = int(np.sum(draws < 0.3))
    sigma = math.sqrt(1000 * 0.3 * 0.7)
    assert abs(hits - 300) <= 3 * sigma


def test_custom_heuristic_activation_counts():
    # a custom heuristic sees activation draws from the solve-level stream
    Q = np.eye(2)
    b = -np.array([0.4, 0.6])
    f, grad = quad_oracles(Q, b)
    cube = HypercubeLMO(2)
    lmo = ManagedLMO(cube, np.zeros(2), np.ones(2), range(2), 2)
    problem = ProblemSpec(f=f, grad=grad, lmo=lmo, n=2)
    hits = []
    settings = create_default_settings()
    settings.heuristic.custom = [
        ("count", 1.0, lambda node, x, merged, solver: hits.append(node.id) or None)
    ]
    _, _, result = solve(problem, settings)
    assert len(hits) >= 1  # fired at every processed node that ran heuristics

    hits2 = []
    settings = create_default_settings()
    settings.heuristic.custom = [
        ("count", 0.0, lambda node, x, merged, solver: hits2.append(node.id) or None)
    ]
    solve(problem, settings)
    assert hits2 == []


def test_heuristics_never_worsen_incumbent(rng):
    Q, b = random_psd_quadratic(rng, 3)
    f, grad = quad_oracles(Q, b)
    cube = HypercubeLMO(3, np.zeros(3), np.full(3, 2.0))
    lmo = ManagedLMO(cube, np.zeros(3), np.full(3, 2.0), range(3), 3)
    problem = ProblemSpec(f=f, grad=grad, lmo=lmo, n=3)
    settings = create_default_settings()
    settings.heuristic.probability_rounding_prob = 0.5
    settings.heuristic.follow_gradient_prob = 0.5
    incumbents = []
    settings.branch_and_bound.solution_callback = (
        lambda tree, x, value: incumbents.append(value)
    )
    solve(problem, settings)
    assert all(v2 < v1 for v1, v2 in zip(incumbents, incumbents[1:]))
