"""Reference problem packs: network design, graph isomorphism, and optimal
experiment design."""

from . import experiment_design, graph_isomorphism, network_design

__all__ = ["experiment_design", "graph_isomorphism", "network_design"]
