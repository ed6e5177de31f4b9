"""Solver configuration, organized in the groups used throughout the package:
branch-and-bound options, Frank-Wolfe options, domain handling, heuristics,
and tolerances.  ``apply_setting`` accepts dotted keys (e.g.
``frank_wolfe.variant``) so batch runs can override settings from strings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, List, Optional, Tuple

from .core import Tolerances
from .fw import FWVariant, LineSearch


class BranchingRule(Enum):
    MOST_INFEASIBLE = "most_infeasible"
    GRADIENT_BASED = "gradient_based"


@dataclass
class BranchAndBoundSettings:
    verbose: bool = False
    branching: BranchingRule = BranchingRule.MOST_INFEASIBLE
    #: called before each node evaluation: (tree, node, **flags)
    bnb_callback: Optional[Callable] = None
    #: called during branching: (tree, node, var_index) -> bool (False vetoes children)
    branch_callback: Optional[Callable] = None
    #: called on each new incumbent: (tree, x, value)
    solution_callback: Optional[Callable] = None
    #: stop a node's evaluation early once this many other open nodes have
    #: strictly better bounds; None disables premature stopping
    premature_stop_k: Optional[int] = 2


@dataclass
class FrankWolfeSettings:
    variant: FWVariant = FWVariant.BPCG
    lazy: bool = False
    line_search: Optional[LineSearch] = None  # defaults to Secant


@dataclass
class DomainSettings:
    domain_oracle: Optional[Callable] = None
    find_domain_point: Optional[Callable] = None
    #: optional domain-feasible start for the root node
    active_set: Optional[Any] = None
    start_point: Optional[Any] = None


@dataclass
class HeuristicSettings:
    simple_rounding_prob: float = 1.0
    probability_rounding_prob: float = 0.0
    follow_gradient_prob: float = 0.0
    hyperplane_aware_rounding_prob: float = 0.0
    follow_gradient_steps: int = 3
    rng_seed: int = 0
    #: (name, activation_prob, fn(node_context) -> candidate or None)
    custom: List[Tuple[str, float, Callable]] = field(default_factory=list)


@dataclass
class Settings:
    branch_and_bound: BranchAndBoundSettings = field(default_factory=BranchAndBoundSettings)
    frank_wolfe: FrankWolfeSettings = field(default_factory=FrankWolfeSettings)
    domain: DomainSettings = field(default_factory=DomainSettings)
    heuristic: HeuristicSettings = field(default_factory=HeuristicSettings)
    tolerances: Tolerances = field(default_factory=Tolerances)


def create_default_settings() -> Settings:
    return Settings()


_VARIANTS = {
    "standard": FWVariant.STANDARD,
    "afw": FWVariant.AWAY,
    "away": FWVariant.AWAY,
    "pfw": FWVariant.PAIRWISE,
    "pairwise": FWVariant.PAIRWISE,
    "bpcg": FWVariant.BPCG,
    "dicg": FWVariant.DICG,
}

_BRANCHING = {
    "most_infeasible": BranchingRule.MOST_INFEASIBLE,
    "gradient_based": BranchingRule.GRADIENT_BASED,
}


def _parse_bool(value: str) -> bool:
    if value.lower() in ("true", "1", "yes", "on"):
        return True
    if value.lower() in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _parse_optional_int(value: str):
    return None if value.lower() in ("none", "") else int(value)


def _parse_optional_float(value: str):
    return None if value.lower() in ("none", "") else float(value)


def _parse_line_search(value: str):
    from .fw import Agnostic, Backtracking, Secant

    name = value.lower()
    if name == "secant":
        return Secant()
    if name == "backtracking":
        return Backtracking()
    if name == "agnostic":
        return Agnostic()
    raise ValueError(f"unknown line search {value!r}")


# dotted key -> (group attr, field, parser for string values)
_KEYS = {
    "branch_and_bound.verbose": ("branch_and_bound", "verbose", _parse_bool),
    "branch_and_bound.branching": ("branch_and_bound", "branching", _BRANCHING.__getitem__),
    "branch_and_bound.premature_stop_k": ("branch_and_bound", "premature_stop_k", _parse_optional_int),
    "frank_wolfe.variant": ("frank_wolfe", "variant", _VARIANTS.__getitem__),
    "frank_wolfe.lazy": ("frank_wolfe", "lazy", _parse_bool),
    "frank_wolfe.line_search": ("frank_wolfe", "line_search", _parse_line_search),
    "frank_wolfe.max_fw_iter": ("tolerances", "max_fw_iter", int),
    "tolerances.abs_gap": ("tolerances", "abs_gap", float),
    "tolerances.rel_gap": ("tolerances", "rel_gap", float),
    "tolerances.fw_gap_decay": ("tolerances", "fw_gap_decay", float),
    "tolerances.fw_epsilon_start": ("tolerances", "fw_epsilon_start", float),
    "tolerances.fw_epsilon_min": ("tolerances", "fw_epsilon_min", float),
    "tolerances.min_lower_bound": ("tolerances", "min_lower_bound", _parse_optional_float),
    "tolerances.max_fw_iter": ("tolerances", "max_fw_iter", int),
    "tolerances.node_limit": ("tolerances", "node_limit", _parse_optional_int),
    "tolerances.time_limit_s": ("tolerances", "time_limit_s", _parse_optional_float),
    "heuristic.simple_rounding_prob": ("heuristic", "simple_rounding_prob", float),
    "heuristic.probability_rounding_prob": ("heuristic", "probability_rounding_prob", float),
    "heuristic.follow_gradient_prob": ("heuristic", "follow_gradient_prob", float),
    "heuristic.hyperplane_aware_rounding_prob": ("heuristic", "hyperplane_aware_rounding_prob", float),
    "heuristic.follow_gradient_steps": ("heuristic", "follow_gradient_steps", int),
    "heuristic.rng_seed": ("heuristic", "rng_seed", int),
}

# Domain entries hold callables and starting sets; they are assigned as-is.
_DOMAIN_FIELDS = ("domain_oracle", "find_domain_point", "active_set", "start_point")


def apply_setting(settings: Settings, key: str, value) -> None:
    """Apply one dotted-key override; string values are parsed to the field's
    type, non-strings are assigned directly."""
    if key.startswith("domain."):
        name = key.split(".", 1)[1]
        if name not in _DOMAIN_FIELDS:
            raise KeyError(f"unknown setting {key!r}")
        setattr(settings.domain, name, value)
        return
    if key not in _KEYS:
        raise KeyError(f"unknown setting {key!r}")
    group, attr, parser = _KEYS[key]
    if isinstance(value, str):
        value = parser(value)
    setattr(getattr(settings, group), attr, value)
