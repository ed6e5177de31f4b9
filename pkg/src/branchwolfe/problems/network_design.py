"""Network design with congestion costs and a penalty reformulation.

Binary design variables pick which candidate arcs to build; flows route the
demands.  The linking constraint "no flow on an unbuilt arc" is moved into the
objective as ``mu * sum_z sum_{e in R} max(x_e^z - M^z y_e, 0)^p`` with p > 1,
which keeps the objective C^1 and lets the feasible region factor into a 0/1
box times an uncapacitated flow region (both with cheap oracles).

Variable layout: the ``|R|`` design variables first, then one flow block over
all arcs (existing then candidate) per destination, destinations sorted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..bnb import ProblemSpec
from ..lmo import ManagedLMO
from ..polytopes import DesignFlowLMO, FlowLMO
from ..settings import Settings, create_default_settings


@dataclass
class NetworkDesignInstance:
    num_nodes: int
    arcs: list                 # existing arcs (tail, head)
    candidate_arcs: list       # buildable arcs (tail, head)
    alpha: np.ndarray          # per arc, existing then candidate
    beta: np.ndarray
    gamma: np.ndarray
    rho: np.ndarray            # congestion exponents, all > 1
    design_cost: np.ndarray    # per candidate arc
    demands: dict              # (source, destination) -> amount
    penalty_mu: float = 1e3
    penalty_p: float = 1.5
    big_m: dict = field(default_factory=dict)  # destination -> flow cap

    def __post_init__(self):
        self.arcs = [(int(t), int(h)) for t, h in self.arcs]
        self.candidate_arcs = [(int(t), int(h)) for t, h in self.candidate_arcs]
        for name in ("alpha", "beta", "gamma", "rho", "design_cost"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.demands = {(int(s), int(z)): float(d) for (s, z), d in self.demands.items()}
        n_arcs = len(self.arcs) + len(self.candidate_arcs)
        for name in ("alpha", "beta", "gamma", "rho"):
            if getattr(self, name).shape[0] != n_arcs:
                raise ValueError(f"{name} must have one entry per arc")
        if self.design_cost.shape[0] != len(self.candidate_arcs):
            raise ValueError("design_cost must have one entry per candidate arc")
        if np.any(self.rho <= 1.0):
            raise ValueError("congestion exponents must exceed 1")
        if self.penalty_mu <= 0.0 or self.penalty_p <= 1.0:
            raise ValueError("penalty requires mu > 0 and p > 1")
        totals = {}
        for (_, z), d in self.demands.items():
            totals[z] = totals.get(z, 0.0) + d
        if not self.big_m:
            self.big_m = totals
        for z, total in totals.items():
            if self.big_m.get(z, 0.0) < total - 1e-9:
                raise ValueError(f"big-M for destination {z} is below its demand")

    @property
    def all_arcs(self) -> list:
        return self.arcs + self.candidate_arcs

    @property
    def destinations(self) -> list:
        return sorted({z for (_, z) in self.demands})

    @property
    def num_design(self) -> int:
        return len(self.candidate_arcs)

    @property
    def num_vars(self) -> int:
        return self.num_design + len(self.all_arcs) * len(self.destinations)


def make_objective(inst: NetworkDesignInstance):
    """Design cost + congestion cost of the total arc flows + linking penalty.

    Per-arc travel time is ``alpha + beta*x + gamma*x^rho`` evaluated at the
    total flow over all destinations; with p > 1 the penalty hinge is C^1, so
    the gradient below is exact everywhere.
    """
    n_arcs = len(inst.all_arcs)
    r = inst.num_design
    dests = inst.destinations
    nz = len(dests)
    cand = np.arange(len(inst.arcs), n_arcs)  # candidate arc positions
    big_m = np.array([inst.big_m[z] for z in dests])
    alpha, beta, gamma, rho = inst.alpha, inst.beta, inst.gamma, inst.rho
    mu, p = inst.penalty_mu, inst.penalty_p

    def unpack(x):
        x = np.asarray(x, dtype=float)
        return x[:r], x[r:].reshape(nz, n_arcs)

    def f(x):
        y, flows = unpack(x)
        total = flows.sum(axis=0)
        cost = float(np.dot(inst.design_cost, y))
        cost += float(np.sum(alpha + beta * total + gamma * np.power(total, rho)))
        if r:
            over = flows[:, cand] - big_m[:, None] * y[None, :]
            cost += mu * float(np.sum(np.power(np.maximum(over, 0.0), p)))
        return cost

    def grad(storage, x):
        y, flows = unpack(x)
        total = flows.sum(axis=0)
        marginal = beta + rho * gamma * np.power(total, rho - 1.0)
        gflow = np.broadcast_to(marginal, (nz, n_arcs)).copy()
        gy = inst.design_cost.copy()
        if r:
            over = np.maximum(flows[:, cand] - big_m[:, None] * y[None, :], 0.0)
            hinge = p * mu * np.power(over, p - 1.0)
            gflow[:, cand] += hinge
            gy -= (hinge * big_m[:, None]).sum(axis=0)
        storage[:r] = gy
        storage[r:] = gflow.ravel()

    return f, grad


def build_problem(inst: NetworkDesignInstance) -> ProblemSpec:
    flow = FlowLMO(inst.num_nodes, inst.all_arcs, inst.demands)
    product = DesignFlowLMO(inst.num_design, flow)
    r = inst.num_design
    lmo = ManagedLMO(product, np.zeros(r), np.ones(r), range(r), inst.num_vars)
    f, grad = make_objective(inst)
    return ProblemSpec(f=f, grad=grad, lmo=lmo, n=inst.num_vars,
                       name="network_design")


def default_settings(verbose: bool = False) -> Settings:
    # The penalty hinge has unbounded curvature, so node relaxations creep
    # near the kink; capping node iterations keeps the bounds valid (the gap
    # certificate holds at every iteration) while the tree does the rest.
    settings = create_default_settings()
    settings.branch_and_bound.verbose = verbose
    settings.frank_wolfe.lazy = True
    settings.tolerances.max_fw_iter = 3000
    return settings


def generate_instance(num_nodes: int = 8, num_sources: int = 2,
                      num_destinations: int = 1, num_candidates: int = 3,
                      seed: int = 0, radius: float = 0.45) -> NetworkDesignInstance:
    """Random geometric instance: nodes at random planar points ordered left to
    right, arcs pointing rightward within ``radius``; sources are the leftmost
    nodes (never re-entered), destinations the rightmost (never exited).
    A rightward chain is added so every demand is routable.
    """
    rng = np.random.default_rng(seed)
    if num_sources + num_destinations >= num_nodes:
        raise ValueError("too few interior nodes")
    pts = rng.random((num_nodes, 2))
    order = np.argsort(pts[:, 0], kind="stable")
    pts = pts[order]
    sources = list(range(num_sources))
    dests = list(range(num_nodes - num_destinations, num_nodes))

    def allowed(i, j):
        return i < j and j not in set(sources) and i not in set(dests)

    arcs = []
    for i in range(num_nodes):
        for j in range(i + 1, num_nodes):
            if allowed(i, j) and np.linalg.norm(pts[i] - pts[j]) <= radius:
                arcs.append((i, j))
    # connectivity repair: a rightward chain from each source through the
    # non-source interior to the last node
    first_interior = num_sources
    for s in sources:
        if (s, first_interior) not in arcs:
            arcs.append((s, first_interior))
    for k in range(first_interior, num_nodes - 1):
        if (k, k + 1) not in arcs:
            arcs.append((k, k + 1))
    arcs = sorted(set(arcs))

    missing = [
        (i, j)
        for i in range(num_nodes)
        for j in range(i + 1, num_nodes)
        if allowed(i, j) and (i, j) not in set(arcs)
    ]
    rng.shuffle(missing)
    candidates = sorted(missing[:num_candidates])

    n_arcs = len(arcs) + len(candidates)
    demands = {}
    for s in sources:
        for z in dests:
            demands[(s, z)] = float(np.round(rng.uniform(1.0, 3.0), 3))
    return NetworkDesignInstance(
        num_nodes=num_nodes,
        arcs=arcs,
        candidate_arcs=candidates,
        alpha=np.round(rng.uniform(0.5, 2.0, size=n_arcs), 3),
        beta=np.round(rng.uniform(0.1, 1.0, size=n_arcs), 3),
        gamma=np.round(rng.uniform(0.05, 0.5, size=n_arcs), 3),
        rho=rng.choice([1.5, 2.0], size=n_arcs),
        design_cost=np.round(rng.uniform(0.5, 4.0, size=len(candidates)), 3),
        demands=demands,
    )
