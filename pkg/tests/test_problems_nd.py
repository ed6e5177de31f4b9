import math

import numpy as np
import pytest

from branchwolfe.bnb import SolvingStage, solve
from branchwolfe.problems import network_design as nd

from conftest import assert_gradient_matches


def tiny_instance():
    # two parallel routes 0 -> 2 plus one candidate shortcut
    return nd.NetworkDesignInstance(
        num_nodes=3,
        arcs=[(0, 1), (1, 2)],
        candidate_arcs=[(0, 2)],
        alpha=[1.0, 1.0, 0.5],
        beta=[0.2, 0.2, 0.1],
        gamma=[0.1, 0.1, 0.05],
        rho=[1.5, 2.0, 1.5],
        design_cost=[2.0],
        demands={(0, 2): 2.0},
    )


def test_instance_validation():
    with pytest.raises(ValueError):
        nd.NetworkDesignInstance(
            num_nodes=2, arcs=[(0, 1)], candidate_arcs=[],
            alpha=[1.0], beta=[1.0], gamma=[1.0], rho=[1.0],  # rho must exceed 1
            design_cost=[], demands={(0, 1): 1.0},
        )
    with pytest.raises(ValueError):
        nd.NetworkDesignInstance(
            num_nodes=2, arcs=[(0, 1)], candidate_arcs=[],
            alpha=[1.0], beta=[1.0], gamma=[1.0], rho=[1.5],
            design_cost=[], demands={(0, 1): 1.0}, big_m={1: 0.5},
        )


def test_objective_zero_point_sums_alpha():
    inst = tiny_instance()
    f, _ = nd.make_objective(inst)
    x = np.zeros(inst.num_vars)
    assert f(x) == pytest.approx(float(np.sum(inst.alpha)))


def test_penalty_inactive_when_linked():
    inst = tiny_instance()
    f, _ = nd.make_objective(inst)
    # flow on the candidate arc with its design variable on: no penalty
    x = np.zeros(inst.num_vars)
    x[0] = 1.0          # y for candidate (0, 2)
    x[1 + 2] = 2.0      # flow block: candidate arc is index 2
    base = float(inst.design_cost[0])
    total = np.array([0.0, 0.0, 2.0])
    base += float(np.sum(inst.alpha + inst.beta * total
                         + inst.gamma * np.power(total, inst.rho)))
    assert f(x) == pytest.approx(base)


def test_penalty_active_when_unlinked():
    inst = tiny_instance()
    f, _ = nd.make_objective(inst)
    x = np.zeros(inst.num_vars)
    x[1 + 2] = 2.0  # flow on the unbuilt candidate arc
    linked = np.zeros(inst.num_vars)
    linked[0] = 1.0
    linked[1 + 2] = 2.0
    assert f(x) > f(linked)


def test_objective_equals_design_plus_operating_cost_when_linked(rng):
    inst = nd.generate_instance(num_nodes=6, num_sources=1, num_destinations=1,
                                num_candidates=2, seed=2)
    f, _ = nd.make_objective(inst)
    r = inst.num_design
    nz = len(inst.destinations)
    m = len(inst.all_arcs)
    for _ in range(10):
        y = np.ones(r)  # everything built: linking always satisfied
        flows = rng.uniform(0.0, 1.0, size=nz * m)
        x = np.concatenate([y, flows])
        total = flows.reshape(nz, m).sum(axis=0)
        expected = float(inst.design_cost @ y) + float(
            np.sum(inst.alpha + inst.beta * total
                   + inst.gamma * np.power(total, inst.rho))
        )
        assert f(x) == pytest.approx(expected, rel=1e-12)


def test_gradient_finite_differences(rng):
    inst = nd.generate_instance(num_nodes=6, num_sources=2, num_destinations=1,
                                num_candidates=2, seed=4)
    f, grad = nd.make_objective(inst)
    for _ in range(5):
        x = rng.uniform(0.1, 1.2, size=inst.num_vars)
        assert_gradient_matches(f, grad, x)


def test_generated_instances_routable(rng):
    for seed in range(5):
        inst = nd.generate_instance(num_nodes=7, num_sources=2,
                                    num_destinations=2, num_candidates=2,
                                    seed=seed)
        # construction succeeds only if every demand is routable
        problem = nd.build_problem(inst)
        assert problem.n == inst.num_vars


def test_solve_produces_feasible_mixed_solution():
    inst = nd.generate_instance(num_nodes=6, num_sources=1, num_destinations=1,
                                num_candidates=2, seed=7)
    problem = nd.build_problem(inst)
    settings = nd.default_settings()
    settings.tolerances.time_limit_s = 60.0
    x, _, result = solve(problem, settings)
    assert x is not None
    r = inst.num_design
    y = x[:r]
    np.testing.assert_allclose(y, np.rint(y), atol=1e-6)
    flow = problem.lmo.inner.flow
    assert flow.is_simple_linear_feasible(x[r:], atol=1e-7)
    trace = result["trace"]
    lbs = [row.lb for row in trace]
    assert all(b2 >= b1 - 1e-9 for b1, b2 in zip(lbs, lbs[1:]))
