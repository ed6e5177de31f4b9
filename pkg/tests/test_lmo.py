import itertools

import numpy as np
import pytest

from branchwolfe.core import GREATER, LESS, IntegerBounds
from branchwolfe.errors import NodeInfeasible
from branchwolfe.lmo import ManagedLMO, TimeTrackingLMO, managed_compute_extreme_point
from branchwolfe.polytopes import BirkhoffLMO, HypercubeLMO, SimplexKnapsackLMO


def cube3():
    return HypercubeLMO(3)


def glob3():
    return IntegerBounds({i: 0.0 for i in range(3)}, {i: 1.0 for i in range(3)},
                         int_vars=range(3))


def test_managed_sign_pattern():
    node = IntegerBounds(int_vars=range(3))
    v = managed_compute_extreme_point(cube3(), node, glob3(),
                                      np.array([1.0, -1.0, 1.0]))
    np.testing.assert_allclose(v, [0.0, 1.0, 0.0])


def test_managed_node_bound_wins():
    node = IntegerBounds({0: 1.0}, {}, int_vars=range(3))
    v = managed_compute_extreme_point(cube3(), node, glob3(),
                                      np.array([1.0, -1.0, 1.0]))
    np.testing.assert_allclose(v, [1.0, 1.0, 0.0])


def test_managed_crossed_bounds_raise_before_oracle():
    class Exploding(HypercubeLMO):
        def bounded_compute_extreme_point(self, *args, **kwargs):
            raise AssertionError("oracle must not be called")

    # cross the bounds through the merge: node lower 1 vs global upper 0
    node = IntegerBounds({0: 1.0}, {}, int_vars=range(3))
    glob = IntegerBounds({i: 0.0 for i in range(3)}, {0: 0.0, 1: 1.0, 2: 1.0},
                         int_vars=range(3))
    with pytest.raises(NodeInfeasible):
        managed_compute_extreme_point(Exploding(3), node, glob,
                                      np.array([1.0, 1.0, 1.0]))


def test_managed_rejects_nan_direction():
    with pytest.raises(ValueError):
        managed_compute_extreme_point(cube3(), IntegerBounds(int_vars=range(3)),
                                      glob3(), np.array([1.0, np.nan, 0.0]))


def _simplex_integer_vertices(m, budget, lower, upper):
    pts = []
    for point in itertools.product(range(int(budget) + 1), repeat=m):
        if sum(point) != budget:
            continue
        x = np.array(point, dtype=float)
        if np.all(x >= lower - 1e-9) and np.all(x <= upper + 1e-9):
            pts.append(x)
    return pts


def test_managed_simplex_matches_enumeration(rng):
    m, budget = 5, 3
    upper = np.array([2.0, 2.0, 1.0, 3.0, 2.0])
    inner = SimplexKnapsackLMO(m, budget, upper)
    glob = IntegerBounds({i: 0.0 for i in range(m)},
                         {i: upper[i] for i in range(m)}, int_vars=range(m))
    for _ in range(25):
        d = rng.normal(size=m)
        node_lower, node_upper = {}, {}
        for i in rng.choice(m, size=2, replace=False):
            if rng.random() < 0.5:
                node_lower[int(i)] = 1.0
            else:
                node_upper[int(i)] = float(rng.integers(0, 2))
        node = IntegerBounds(node_lower, node_upper, int_vars=range(m))
        lo = np.array([node.lower.get(i, 0.0) for i in range(m)])
        hi = np.array([node.upper.get(i, upper[i]) for i in range(m)])
        feasible = _simplex_integer_vertices(m, budget, lo, hi)
        if not feasible or lo.sum() > budget or hi.sum() < budget:
            continue
        v = managed_compute_extreme_point(inner, node, glob, d)
        best = min(float(d @ p) for p in feasible)
        assert float(d @ v) == pytest.approx(best, abs=1e-9)


def test_managed_lmo_wrapper_roundtrip():
    inner = cube3()
    lmo = ManagedLMO(inner, np.zeros(3), np.ones(3), range(3), 3)
    d = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(lmo.compute_extreme_point(d), [0.0, 1.0, 0.0])
    lmo.set_node_bounds(IntegerBounds({0: 1.0}, {}, int_vars=range(3)))
    np.testing.assert_allclose(lmo.compute_extreme_point(d), [1.0, 1.0, 0.0])
    assert lmo.is_linear_feasible(np.array([1.0, 1.0, 0.0]))
    assert not lmo.is_linear_feasible(np.array([0.0, 1.0, 0.0]))  # node bound


# -- self-managed bound construction ----------------------------------------


def test_birkhoff_build_global_bounds_dim3():
    lmo = BirkhoffLMO(3)
    bounds = lmo.build_global_bounds(lmo.get_integer_variables())
    assert len(bounds.lower) == 9 and len(bounds.upper) == 9
    assert all(bounds.lower[i] == 0.0 for i in range(9))
    assert all(bounds.upper[i] == 1.0 for i in range(9))


def test_cube_global_bounds_dim2():
    lmo = ManagedLMO(HypercubeLMO(2), [0.0, 0.0], [1.0, 1.0], range(2), 2)
    assert lmo.global_bounds.lower == {0: 0.0, 1: 0.0}
    assert lmo.global_bounds.upper == {0: 1.0, 1: 1.0}


def test_birkhoff_get_bound_agrees_with_lists():
    lmo = BirkhoffLMO(3)
    lmo.set_bound(4, 1.0, GREATER)
    lmo.set_bound(2, 0.0, LESS)
    lmo.delete_bounds([])
    lower = lmo.get_lower_bound_list()
    upper = lmo.get_upper_bound_list()
    for idx in lmo.get_integer_variables():
        assert lmo.get_bound(idx, GREATER) == lower[idx]
        assert lmo.get_bound(idx, LESS) == upper[idx]


# -- instrumentation wrapper --------------------------------------------------


def test_time_tracking_transparent_and_counting(rng):
    inner = cube3()
    tracked = TimeTrackingLMO(inner)
    d = rng.normal(size=3)
    a = inner.compute_extreme_point(d)
    b = tracked.compute_extreme_point(d)
    np.testing.assert_array_equal(a, b)
    assert tracked.call_count == 1
    tracked.bounded_compute_extreme_point(d, np.zeros(3), np.ones(3), [0, 1, 2])
    assert tracked.call_count == 2
    assert tracked.total_time_s >= 0.0
    # delegation of everything else
    assert tracked.n == 3
    assert tracked.is_simple_linear_feasible(np.array([0.5, 0.5, 0.5]))


def test_time_tracking_counts_inface_calls():
    lmo = TimeTrackingLMO(BirkhoffLMO(3))
    x = np.full(9, 1.0 / 3.0)
    lmo.compute_inface_extreme_point(np.arange(9.0), x)
    assert lmo.call_count == 1


def test_lmo_determinism(rng):
    lmo = BirkhoffLMO(4)
    d = rng.normal(size=16)
    v1 = lmo.compute_extreme_point(d)
    v2 = lmo.compute_extreme_point(d)
    np.testing.assert_array_equal(v1, v2)
