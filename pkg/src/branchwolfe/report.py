"""Run artifacts: solution files, bound-trace CSVs, and the bound-progress
figure rendered next to them."""

from __future__ import annotations

import json
import math
from pathlib import Path

TRACE_HEADER = "time_s,nodes,lb,ub"


def write_trace_csv(path, trace) -> None:
    lines = [TRACE_HEADER]
    for row in trace:
        ub = "" if row.ub is None else repr(row.ub)
        lines.append(f"{row.time_s!r},{row.nodes},{row.lb!r},{ub}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path):
    from .bnb import TraceRow

    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError(f"unexpected trace header in {path}")
    rows = []
    for line in lines[1:]:
        time_s, nodes, lb, ub = line.split(",")
        rows.append(TraceRow(float(time_s), int(nodes), float(lb),
                             float(ub) if ub else None))
    return rows


def write_solution_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def render_bounds_figure(path, trace, title: str = "") -> None:
    """Step plot of the global lower bound and the incumbent value over time."""
    from matplotlib.figure import Figure

    times = [row.time_s for row in trace]
    lbs = [row.lb if math.isfinite(row.lb) else float("nan") for row in trace]
    ubs = [row.ub if row.ub is not None else float("nan") for row in trace]

    fig = Figure(figsize=(7.0, 4.2))
    ax = fig.add_subplot(111)
    if times:
        ax.step(times, lbs, where="post", label="lower bound", color="tab:blue")
        ax.step(times, ubs, where="post", label="incumbent", color="tab:orange")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("objective bound")
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
