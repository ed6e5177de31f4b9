import itertools
import json
from pathlib import Path

import numpy as np
import pytest

from branchwolfe.cli import main
from branchwolfe.errors import InstanceError
from branchwolfe.instances import dump_instance, generate, load_instance
from branchwolfe.report import TRACE_HEADER, read_trace_csv


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def cube_instance():
    return {
        "kind": "cube_quadratic",
        "quadratic": [[2.0, 0.0], [0.0, 2.0]],
        "linear": [-1.2, -2.6],
        "lower": [0, 0],
        "upper": [2, 2],
    }


# -- validation ----------------------------------------------------------------


def test_unknown_kind_rejected(tmp_path):
    path = write(tmp_path, "bad.json", {"kind": "sudoku"})
    with pytest.raises(InstanceError, match="instance.kind"):
        load_instance(path)


def test_unknown_field_rejected(tmp_path):
    data = cube_instance()
    data["typo_field"] = 1
    path = write(tmp_path, "bad.json", data)
    with pytest.raises(InstanceError, match="typo_field"):
        load_instance(path)


def test_missing_field_has_path(tmp_path):
    data = cube_instance()
    del data["linear"]
    path = write(tmp_path, "bad.json", data)
    with pytest.raises(InstanceError, match=r"instance\.linear"):
        load_instance(path)


def test_bad_entry_type_has_path(tmp_path):
    data = cube_instance()
    data["linear"] = [0.0, "x"]
    path = write(tmp_path, "bad.json", data)
    with pytest.raises(InstanceError, match=r"instance\.linear\[1\]"):
        load_instance(path)


def test_edge_out_of_range(tmp_path):
    data = {"kind": "graph_isomorphism", "n": 3,
            "edges_a": [[0, 7]], "edges_b": []}
    path = write(tmp_path, "bad.json", data)
    with pytest.raises(InstanceError, match=r"edges_a\[0\]"):
        load_instance(path)


def test_settings_override_in_file(tmp_path):
    data = cube_instance()
    data["settings"] = {"frank_wolfe.variant": "afw", "tolerances.abs_gap": 1e-7}
    path = write(tmp_path, "inst.json", data)
    problem, settings, _ = load_instance(path)
    from branchwolfe.fw import FWVariant

    assert settings.frank_wolfe.variant == FWVariant.AWAY
    assert settings.tolerances.abs_gap == 1e-7


def test_unknown_setting_rejected(tmp_path):
    data = cube_instance()
    data["settings"] = {"frank_wolfe.bogus": 1}
    path = write(tmp_path, "inst.json", data)
    with pytest.raises(InstanceError, match="frank_wolfe.bogus"):
        load_instance(path)


# -- generation ------------------------------------------------------------------


def test_generate_deterministic_bytes(tmp_path, capsys):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    assert main(["generate", "graph_isomorphism", "--n", "10", "--seed", "7",
                 "--out", str(out1)]) == 0
    assert main(["generate", "graph_isomorphism", "--n", "10", "--seed", "7",
                 "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_generate_roundtrip_idempotent(tmp_path):
    for kind, params in (
        ("graph_isomorphism", {"n": 8}),
        ("experiment_design", {"m": 10, "n": 3, "budget": 4}),
        ("network_design", {"nodes": 6, "sources": 1, "destinations": 1,
                            "candidates": 2}),
    ):
        data = generate(kind, seed=3, **params)
        path = tmp_path / f"{kind}.json"
        path.write_text(dump_instance(data))
        problem, settings, loaded = load_instance(path)
        reserialized = dump_instance({k: v for k, v in loaded.items()})
        assert reserialized == dump_instance(data)


def test_generate_oedp_rank_verified_on_load(tmp_path):
    data = generate("experiment_design", seed=11, m=12, n=4, budget=5)
    A = np.asarray(data["matrix"])
    assert np.linalg.matrix_rank(A) == 4
    path = tmp_path / "oedp.json"
    path.write_text(dump_instance(data))
    problem, _, _ = load_instance(path)
    assert problem.n == 12


def test_generate_nd_demands_routable(tmp_path):
    data = generate("network_design", seed=5, nodes=5, sources=2,
                    destinations=1, candidates=2)
    path = tmp_path / "nd.json"
    path.write_text(dump_instance(data))
    problem, _, _ = load_instance(path)  # construction checks reachability
    assert problem.name == "network_design"


# -- run -------------------------------------------------------------------------


def test_run_cube_quadratic_matches_enumeration(tmp_path, capsys):
    data = cube_instance()
    path = write(tmp_path, "inst.json", data)
    out_dir = tmp_path / "out"
    code = main(["run", path, "--out", str(out_dir), "--seed", "3"])
    assert code == 0
    captured = capsys.readouterr().out
    assert "status=optimal_reached" in captured

    payload = json.loads((out_dir / "solution.json").read_text())
    Q = np.asarray(data["quadratic"])
    b = np.asarray(data["linear"])
    best = min(
        0.5 * float(np.array(p) @ Q @ np.array(p)) + float(b @ np.array(p))
        for p in itertools.product(range(3), repeat=2)
    )
    assert payload["objective"] == pytest.approx(best, abs=1e-6)
    assert payload["status"] == "optimal_reached"
    assert (out_dir / "bounds.png").exists()

    rows = read_trace_csv(out_dir / "trace.csv")
    assert rows
    header = (out_dir / "trace.csv").read_text().splitlines()[0]
    assert header == TRACE_HEADER == "time_s,nodes,lb,ub"


def test_run_gip_petersen_pair(tmp_path, capsys):
    from branchwolfe.problems import graph_isomorphism as gip

    rng = np.random.default_rng(9)
    A = gip.adjacency_from_edges(10, gip.petersen_edges())
    sigma = rng.permutation(10)
    B = gip.relabel_adjacency(A, sigma)
    data = {
        "kind": "graph_isomorphism",
        "n": 10,
        "edges_a": [[int(i), int(j)] for i in range(10) for j in range(i + 1, 10)
                    if A[i, j]],
        "edges_b": [[int(i), int(j)] for i in range(10) for j in range(i + 1, 10)
                    if B[i, j]],
    }
    path = write(tmp_path, "gip.json", data)
    out_dir = tmp_path / "out"
    code = main(["run", path, "--out", str(out_dir)])
    assert code == 0
    captured = capsys.readouterr().out
    assert "verdict=isomorphic" in captured
    payload = json.loads((out_dir / "solution.json").read_text())
    assert payload["verdict"] == "isomorphic"
    assert payload["objective"] <= 1e-8


def test_run_time_limit_exit_code(tmp_path, capsys):
    data = generate("network_design", seed=1, nodes=8, sources=2,
                    destinations=2, candidates=3)
    path = tmp_path / "nd.json"
    path.write_text(dump_instance(data))
    out_dir = tmp_path / "out"
    code = main(["run", str(path), "--out", str(out_dir),
                 "--time-limit", "0.001", "--no-figure"])
    assert code == 2
    rows = read_trace_csv(out_dir / "trace.csv")
    assert rows  # the trace is written even on limit stops


def test_run_invalid_instance_exit_code(tmp_path, capsys):
    path = write(tmp_path, "bad.json", {"kind": "cube_quadratic"})
    code = main(["run", path, "--out", str(tmp_path / "out")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_run_set_override(tmp_path, capsys):
    path = write(tmp_path, "inst.json", cube_instance())
    out_dir = tmp_path / "out"
    code = main(["run", path, "--out", str(out_dir), "--no-figure",
                 "--set", "frank_wolfe.variant=pfw",
                 "--set", "branch_and_bound.verbose=false"])
    assert code == 0


def test_run_bad_set_override(tmp_path, capsys):
    path = write(tmp_path, "inst.json", cube_instance())
    code = main(["run", path, "--out", str(tmp_path / "o"),
                 "--set", "frank_wolfe.nope=1"])
    assert code == 1
