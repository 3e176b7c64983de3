"""Proactive placement and chaining of virtual network functions in a CDN.

Modules:
    topology    network model, random generator, JSON files
    workload    VNF catalog and service requests
    paths       least-delay and k-shortest loopless routing
    placement   solutions, constraint checker, cost model
    exact       branch-and-bound optimum for small instances
    sir         surrogate importance rank
    cpvnf       the rank-driven greedy heuristic
    experiment  seeded scenarios, sweeps and CSV metrics
"""

from .cpvnf import CpvnfParams, CpvnfResult, place_all
from .exact import ExactResult, SearchBudget, solve_exact
from .experiment import ScenarioConfig, build_instance, compare_gap, preset, rows_to_csv, run_scenario, sweep_users
from .placement import (
    CostBreakdown,
    PlacementSolution,
    check_feasibility,
    compute_cost,
    compute_metrics,
)
from .sir import SirParams, personalized_sir
from .topology import Topology, TopologyGenParams, generate_topology
from .workload import Workload, WorkloadGenParams, generate_workload

__version__ = "0.1.0"

__all__ = [
    "CostBreakdown",
    "CpvnfParams",
    "CpvnfResult",
    "ExactResult",
    "PlacementSolution",
    "ScenarioConfig",
    "SearchBudget",
    "SirParams",
    "Topology",
    "TopologyGenParams",
    "Workload",
    "WorkloadGenParams",
    "build_instance",
    "check_feasibility",
    "compare_gap",
    "compute_cost",
    "compute_metrics",
    "generate_topology",
    "generate_workload",
    "personalized_sir",
    "place_all",
    "preset",
    "rows_to_csv",
    "run_scenario",
    "solve_exact",
    "sweep_users",
]
