"""Shared helpers: independent solvers and problem builders used as oracles.

These deliberately avoid the package's own solver paths (plain projected
gradient, sort-based projections, exhaustive enumeration) so the tests check
against independently computed values.
"""

import math

import numpy as np
import pytest


def random_psd_quadratic(rng, n, cond=1.0):
    """Q positive definite, b chosen so the unconstrained optimum is random."""
    M = rng.normal(size=(n, n))
    Q = M.T @ M + cond * np.eye(n)
    target = rng.uniform(-0.5, 1.5, size=n)
    b = -Q @ target
    return Q, b


def quad_oracles(Q, b):
    def f(x):
        return 0.5 * float(x @ Q @ x) + float(b @ x)

    def grad(storage, x):
        storage[:] = Q @ x + b

    return f, grad


def project_box(x, lower, upper):
    return np.clip(x, lower, upper)


def project_simplex(v, total=1.0):
    """Euclidean projection onto {x >= 0, sum x = total} via sorting."""
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, n + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(v - theta, 0.0)


def pgd_minimize(Q, b, project, lmo_min, x0, tol=1e-10, max_iter=200000):
    """Projected gradient on a quadratic, run until the FW gap drops below
    ``tol``.  ``lmo_min(g)`` must return the linear minimizer over the set."""
    L = float(np.linalg.eigvalsh(Q).max())
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        g = Q @ x + b
        v = lmo_min(g)
        if float(g @ (x - v)) <= tol:
            break
        x = project(x - g / L)
    return x, 0.5 * float(x @ Q @ x) + float(b @ x)


def box_lmo_min(lower, upper):
    def lmo(g):
        return np.where(g > 0.0, lower, upper)

    return lmo


def simplex_lmo_min(n, total=1.0):
    def lmo(g):
        v = np.zeros(n)
        v[int(np.argmin(g))] = total
        return v

    return lmo


def finite_difference_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def assert_gradient_matches(f, grad, x, rel_tol=1e-5, h=1e-6):
    g = np.empty(len(x))
    grad(g, np.asarray(x, dtype=float))
    fd = finite_difference_gradient(f, x, h)
    scale = max(1.0, float(np.max(np.abs(fd))))
    assert np.max(np.abs(g - fd)) / scale <= rel_tol


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
