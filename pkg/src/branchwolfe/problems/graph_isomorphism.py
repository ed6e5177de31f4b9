"""Graph isomorphism as quadratic minimization over doubly stochastic matrices.

Two graphs with adjacency matrices A and B are isomorphic iff the minimum of
``||XA - BX||_F^2`` over permutation matrices is exactly zero, so a single
integer-feasible point with value zero certifies isomorphism and a positive
global lower bound certifies non-isomorphism.  Both certificates are wired in
through tree and branch callbacks that stop the search as soon as either one
is available.

Matrix variables are flattened column-major to match the Birkhoff oracle's
linear indexing.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..bnb import BnBNode, ProblemSpec, SolvingStage, Tree
from ..fw import FWVariant, Secant
from ..polytopes import BirkhoffLMO
from ..settings import Settings, create_default_settings

#: objective values / bounds below this are treated as zero when certifying
CERT_TOL = 1e-8


def petersen_edges() -> list[tuple[int, int]]:
    """Outer 5-cycle, inner pentagram, and the five spokes."""
    return [
        (0, 1), (1, 2), (2, 3), (3, 4), (4, 0),
        (5, 7), (7, 9), (9, 6), (6, 8), (8, 5),
        (0, 5), (1, 6), (2, 7), (3, 8), (4, 9),
    ]


def adjacency_from_edges(n: int, edges) -> np.ndarray:
    adj = np.zeros((n, n))
    for u, v in edges:
        if u == v:
            raise ValueError("self-loops are not supported")
        adj[u, v] = 1.0
        adj[v, u] = 1.0
    return adj


def relabel_adjacency(adj: np.ndarray, sigma) -> np.ndarray:
    """Adjacency of the graph with vertex i renamed to position i of sigma."""
    sigma = np.asarray(sigma, dtype=int)
    return adj[np.ix_(sigma, sigma)]


def permutation_matrix(sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=int)
    n = sigma.shape[0]
    P = np.zeros((n, n))
    P[np.arange(n), sigma] = 1.0
    return P


def objective(A: np.ndarray, B: np.ndarray):
    """Value and gradient of ``||XA - BX||_F^2`` over column-major flattened X."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    At = A.T.copy()
    Bt = B.T.copy()

    def f(x):
        X = np.asarray(x, dtype=float).reshape((n, n), order="F")
        R = X @ A - B @ X
        return float(np.sum(R * R))

    def grad(storage, x):
        X = np.asarray(x, dtype=float).reshape((n, n), order="F")
        R = X @ A - B @ X
        G = 2.0 * (R @ At - Bt @ R)
        storage[:] = G.ravel(order="F")

    return f, grad


def build_tree_callback(atol: float = CERT_TOL):
    """Stop as soon as either certificate is available: a zero-value incumbent
    (isomorphic) or a positive global lower bound (non-isomorphic)."""

    def callback(tree: Tree, node: BnBNode, worse_than_incumbent=False,
                 node_infeasible=False, lb_update=False):
        if tree.incumbent is not None and tree.incumbent_value <= atol:
            tree.solving_stage = SolvingStage.USER_STOP
            print("Optimal solution found.")
        elif tree.lower_bound() > atol:
            tree.solving_stage = SolvingStage.USER_STOP
            print("Tree lower bound already positive. No solution possible.")

    return callback


def build_branch_callback(atol: float = CERT_TOL):
    """Veto children of nodes whose bound is already positive: no zero-value
    permutation can live in such a subtree."""

    def callback(tree: Tree, node: BnBNode, var_index: int) -> bool:
        return node.lower_bound <= atol

    return callback


def build_problem(A, B) -> ProblemSpec:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ValueError("adjacency matrices must be square and equally sized")
    if np.any(np.diag(A) != 0.0) or np.any(np.diag(B) != 0.0):
        raise ValueError("adjacency matrices must have zero diagonals")
    n = A.shape[0]
    f, grad = objective(A, B)
    return ProblemSpec(f=f, grad=grad, lmo=BirkhoffLMO(n), n=n * n,
                       name="graph_isomorphism")


def default_settings(verbose: bool = False, max_fw_iter: int = 1000) -> Settings:
    settings = create_default_settings()
    settings.branch_and_bound.verbose = verbose
    settings.branch_and_bound.bnb_callback = build_tree_callback()
    settings.branch_and_bound.branch_callback = build_branch_callback()
    settings.frank_wolfe.variant = FWVariant.DICG
    settings.frank_wolfe.line_search = Secant()
    settings.frank_wolfe.lazy = True
    settings.tolerances.max_fw_iter = max_fw_iter
    return settings


def verdict(tree: Tree, atol: float = CERT_TOL) -> str:
    if tree.incumbent is not None and tree.incumbent_value <= atol:
        return "isomorphic"
    if tree.lower_bound() > atol:
        return "non_isomorphic"
    return "inconclusive"


def random_regular_graph(n: int, degree: int, rng) -> np.ndarray:
    """Adjacency matrix of a uniform-ish random ``degree``-regular graph via
    the pairing model with rejection of loops and parallel edges."""
    if n * degree % 2 != 0:
        raise ValueError("n * degree must be even")
    for _ in range(10000):
        stubs = np.repeat(np.arange(n), degree)
        rng.shuffle(stubs)
        edges = set()
        ok = True
        for k in range(0, stubs.shape[0], 2):
            u, v = int(stubs[k]), int(stubs[k + 1])
            if u == v or (min(u, v), max(u, v)) in edges:
                ok = False
                break
            edges.add((min(u, v), max(u, v)))
        if ok:
            return adjacency_from_edges(n, sorted(edges))
    raise RuntimeError("failed to sample a simple regular graph")


def generate_instance(n: int = 10, degree: int = 3, seed: int = 0,
                      isomorphic: bool = True) -> dict:
    """Instance dict: a random regular graph paired with either a random
    relabeling of itself or an independently sampled graph (the latter is not
    screened for non-isomorphism)."""
    rng = np.random.default_rng(seed)
    A = random_regular_graph(n, degree, rng)
    if isomorphic:
        sigma = rng.permutation(n)
        B = relabel_adjacency(A, sigma)
    else:
        B = random_regular_graph(n, degree, rng)
    return {
        "kind": "graph_isomorphism",
        "n": n,
        "edges_a": _edge_list(A),
        "edges_b": _edge_list(B),
    }


def _edge_list(adj: np.ndarray) -> list[list[int]]:
    n = adj.shape[0]
    return [[i, j] for i in range(n) for j in range(i + 1, n) if adj[i, j] != 0.0]
