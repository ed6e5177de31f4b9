"""Instance files: schema validation, construction of problem + settings, and
generation of reproducible instances.

Files are JSON with a top-level ``kind`` discriminator.  Unknown fields are
rejected and schema errors carry the offending field path.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .bnb import ProblemSpec
from .errors import InstanceError
from .lmo import ManagedLMO
from .polytopes import HypercubeLMO
from .settings import Settings, apply_setting, create_default_settings
from .problems import experiment_design, graph_isomorphism, network_design

KINDS = ("graph_isomorphism", "experiment_design", "network_design", "cube_quadratic")


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------


def _fail(path, msg):
    raise InstanceError(f"{path}: {msg}")


def _check_fields(obj, path, required, optional=()):
    if not isinstance(obj, dict):
        _fail(path, "expected an object")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        _fail(path, f"unknown fields {sorted(unknown)}")
    for key in required:
        if key not in obj:
            _fail(f"{path}.{key}", "missing required field")


def _as_int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    return value


def _as_num(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    return float(value)


def _as_edge_list(value, path, n):
    if not isinstance(value, list):
        _fail(path, "expected a list of [u, v] pairs")
    edges = []
    for k, item in enumerate(value):
        if not (isinstance(item, list) and len(item) == 2):
            _fail(f"{path}[{k}]", "expected a [u, v] pair")
        u = _as_int(item[0], f"{path}[{k}][0]")
        v = _as_int(item[1], f"{path}[{k}][1]")
        if not (0 <= u < n and 0 <= v < n):
            _fail(f"{path}[{k}]", f"vertex out of range 0..{n - 1}")
        edges.append((u, v))
    return edges


def _as_num_list(value, path, length=None):
    if not isinstance(value, list):
        _fail(path, "expected a list of numbers")
    if length is not None and len(value) != length:
        _fail(path, f"expected {length} entries, got {len(value)}")
    return [_as_num(v, f"{path}[{k}]") for k, v in enumerate(value)]


def _as_matrix(value, path):
    if not isinstance(value, list) or not value:
        _fail(path, "expected a nonempty list of rows")
    width = None
    rows = []
    for k, row in enumerate(value):
        entries = _as_num_list(row, f"{path}[{k}]")
        if width is None:
            width = len(entries)
        elif len(entries) != width:
            _fail(f"{path}[{k}]", "ragged matrix rows")
        rows.append(entries)
    return np.asarray(rows, dtype=float)


def _settings_from(data, path) -> Settings:
    settings = create_default_settings()
    overrides = data.get("settings", {})
    if not isinstance(overrides, dict):
        _fail(f"{path}.settings", "expected an object of dotted keys")
    return settings, overrides


def _apply_overrides(settings, overrides, path):
    for key, value in overrides.items():
        try:
            apply_setting(settings, key, value)
        except (KeyError, ValueError) as exc:
            _fail(f"{path}.settings.{key}", str(exc))


# ---------------------------------------------------------------------------
# per-kind loaders
# ---------------------------------------------------------------------------


def _load_gip(data):
    _check_fields(data, "instance", ("kind", "n", "edges_a", "edges_b"), ("settings",))
    n = _as_int(data["n"], "instance.n")
    if n < 2:
        _fail("instance.n", "need at least two vertices")
    A = graph_isomorphism.adjacency_from_edges(n, _as_edge_list(data["edges_a"], "instance.edges_a", n))
    B = graph_isomorphism.adjacency_from_edges(n, _as_edge_list(data["edges_b"], "instance.edges_b", n))
    problem = graph_isomorphism.build_problem(A, B)
    settings = graph_isomorphism.default_settings()
    return problem, settings


def _load_oedp(data):
    _check_fields(data, "instance",
                  ("kind", "criterion", "matrix", "budget", "upper_bounds"),
                  ("settings",))
    crit = data["criterion"]
    if crit not in ("A", "D"):
        _fail("instance.criterion", f"expected 'A' or 'D', got {crit!r}")
    A = _as_matrix(data["matrix"], "instance.matrix")
    budget = _as_int(data["budget"], "instance.budget")
    upper = _as_num_list(data["upper_bounds"], "instance.upper_bounds", A.shape[0])
    try:
        problem = experiment_design.build_problem(
            A, budget, upper, experiment_design.Criterion(crit)
        )
        settings = experiment_design.default_settings(problem)
    except ValueError as exc:
        _fail("instance", str(exc))
    return problem, settings


def _load_nd(data):
    _check_fields(
        data, "instance",
        ("kind", "num_nodes", "arcs", "candidate_arcs", "alpha", "beta", "gamma",
         "rho", "design_cost", "demands"),
        ("penalty_mu", "penalty_p", "big_m", "settings"),
    )
    n = _as_int(data["num_nodes"], "instance.num_nodes")
    arcs = _as_edge_list(data["arcs"], "instance.arcs", n)
    cands = _as_edge_list(data["candidate_arcs"], "instance.candidate_arcs", n)
    n_arcs = len(arcs) + len(cands)
    demands = {}
    if not isinstance(data["demands"], list):
        _fail("instance.demands", "expected a list of [source, dest, amount]")
    for k, item in enumerate(data["demands"]):
        if not (isinstance(item, list) and len(item) == 3):
            _fail(f"instance.demands[{k}]", "expected [source, dest, amount]")
        s = _as_int(item[0], f"instance.demands[{k}][0]")
        z = _as_int(item[1], f"instance.demands[{k}][1]")
        d = _as_num(item[2], f"instance.demands[{k}][2]")
        if d < 0:
            _fail(f"instance.demands[{k}][2]", "demand must be nonnegative")
        demands[(s, z)] = d
    big_m = {}
    for key, value in data.get("big_m", {}).items():
        big_m[int(key)] = _as_num(value, f"instance.big_m.{key}")
    try:
        inst = network_design.NetworkDesignInstance(
            num_nodes=n,
            arcs=arcs,
            candidate_arcs=cands,
            alpha=_as_num_list(data["alpha"], "instance.alpha", n_arcs),
            beta=_as_num_list(data["beta"], "instance.beta", n_arcs),
            gamma=_as_num_list(data["gamma"], "instance.gamma", n_arcs),
            rho=_as_num_list(data["rho"], "instance.rho", n_arcs),
            design_cost=_as_num_list(data["design_cost"], "instance.design_cost", len(cands)),
            demands=demands,
            penalty_mu=_as_num(data.get("penalty_mu", 1e3), "instance.penalty_mu"),
            penalty_p=_as_num(data.get("penalty_p", 1.5), "instance.penalty_p"),
            big_m=big_m,
        )
        problem = network_design.build_problem(inst)
    except ValueError as exc:
        _fail("instance", str(exc))
    settings = network_design.default_settings()
    return problem, settings


def _load_cube_quadratic(data):
    _check_fields(data, "instance",
                  ("kind", "quadratic", "linear", "lower", "upper"), ("settings",))
    Q = _as_matrix(data["quadratic"], "instance.quadratic")
    if Q.shape[0] != Q.shape[1]:
        _fail("instance.quadratic", "expected a square matrix")
    n = Q.shape[0]
    b = np.asarray(_as_num_list(data["linear"], "instance.linear", n))
    lower = np.asarray(_as_num_list(data["lower"], "instance.lower", n))
    upper = np.asarray(_as_num_list(data["upper"], "instance.upper", n))
    if np.any(lower > upper):
        _fail("instance.lower", "lower bounds exceed upper bounds")
    Q = 0.5 * (Q + Q.T)

    def f(x):
        return 0.5 * float(x @ Q @ x) + float(b @ x)

    def grad(storage, x):
        storage[:] = Q @ x + b

    cube = HypercubeLMO(n, lower, upper)
    lmo = ManagedLMO(cube, lower, upper, range(n), n)
    problem = ProblemSpec(f=f, grad=grad, lmo=lmo, n=n, name="cube_quadratic")
    return problem, create_default_settings()


_LOADERS = {
    "graph_isomorphism": _load_gip,
    "experiment_design": _load_oedp,
    "network_design": _load_nd,
    "cube_quadratic": _load_cube_quadratic,
}


def load_instance(path):
    """Parse and validate an instance file; returns (problem, settings, data)."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InstanceError(f"cannot read instance {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InstanceError("instance: expected a JSON object")
    kind = data.get("kind")
    if kind not in _LOADERS:
        raise InstanceError(f"instance.kind: expected one of {sorted(_LOADERS)}, got {kind!r}")
    problem, settings = _LOADERS[kind](data)
    _, overrides = _settings_from(data, "instance")
    _apply_overrides(settings, overrides, "instance")
    return problem, settings, data


def dump_instance(data: dict) -> str:
    """Canonical serialization: identical inputs produce identical bytes."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def generate(kind: str, seed: int = 0, **params) -> dict:
    if kind == "graph_isomorphism":
        return graph_isomorphism.generate_instance(
            n=params.get("n", 10), degree=params.get("degree", 3), seed=seed,
            isomorphic=params.get("isomorphic", True),
        )
    if kind == "experiment_design":
        return experiment_design.generate_instance(
            m=params.get("m", 20), n=params.get("n", 4),
            budget=params.get("budget"), seed=seed,
            criterion=params.get("criterion", "A"),
        )
    if kind == "network_design":
        inst = network_design.generate_instance(
            num_nodes=params.get("nodes", 8),
            num_sources=params.get("sources", 2),
            num_destinations=params.get("destinations", 1),
            num_candidates=params.get("candidates", 3),
            seed=seed,
        )
        return instance_to_dict(inst)
    raise InstanceError(f"unknown instance kind {kind!r}")


def instance_to_dict(inst) -> dict:
    """Serialize a network design instance into the file schema."""
    return {
        "kind": "network_design",
        "num_nodes": inst.num_nodes,
        "arcs": [[t, h] for t, h in inst.arcs],
        "candidate_arcs": [[t, h] for t, h in inst.candidate_arcs],
        "alpha": [float(v) for v in inst.alpha],
        "beta": [float(v) for v in inst.beta],
        "gamma": [float(v) for v in inst.gamma],
        "rho": [float(v) for v in inst.rho],
        "design_cost": [float(v) for v in inst.design_cost],
        "demands": sorted([s, z, float(d)] for (s, z), d in inst.demands.items()),
        "big_m": {str(z): float(v) for z, v in sorted(inst.big_m.items())},
    }
