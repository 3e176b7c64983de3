"""Surrogate Importance Rank (SIR) and the content-server penalty.

Node mass combines residual server capacity with the residual bandwidth of
outgoing surrogate links. The personalized rank is a PageRank variant whose
teleport term is boosted on servers already hosting the VNF type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .placement import LogicalOverlay, PlacementState, logical_edge
from .topology import NodeId, Topology
from .workload import ServiceRequest

__all__ = [
    "SirParams",
    "ResidualState",
    "SirVector",
    "DegenerateStateError",
    "node_mass",
    "initial_sir",
    "personalized_sir",
    "content_penalty",
]


class DegenerateStateError(ValueError):
    """No surrogate has positive node mass."""


@dataclass(frozen=True)
class SirParams:
    capacity_weight: float = 0.8
    damping: float = 0.85
    instance_weight: float = 2.0
    penalty_coeff: float = 0.5
    convergence_tol: float = 1e-8
    max_iterations: int = 100

    def __post_init__(self):
        if not 0 < self.capacity_weight <= 1:
            raise ValueError("capacity_weight must be in (0, 1]")
        if not 0 < self.damping < 1:
            raise ValueError("damping must be in (0, 1)")
        if self.instance_weight < 1:
            raise ValueError("instance_weight must be >= 1")
        if not self.penalty_coeff > 0 or not self.convergence_tol > 0 or self.max_iterations < 1:
            raise ValueError("penalty_coeff, convergence_tol and max_iterations must be positive")


@dataclass
class ResidualState:
    """Snapshot of remaining resources that ranks are computed against."""

    topology: Topology
    capacity: Mapping[NodeId, float]  # vCPU
    bandwidth: Mapping[int, float]  # Gbps, by edge id
    hosts: Mapping[int, frozenset[NodeId]] = field(default_factory=dict)  # VNF type -> servers

    @classmethod
    def fresh(cls, t: Topology) -> "ResidualState":
        return cls(
            t,
            {n: a.capacity for n, a in t.surrogate_attrs.items()},
            {eid: e.bandwidth_gbps for eid, e in enumerate(t.edges)},
        )

    @classmethod
    def of(cls, ps: PlacementState) -> "ResidualState":
        hosts: dict[int, set[NodeId]] = {}
        for k, n, _j in ps.loads:
            hosts.setdefault(k, set()).add(n)
        return cls(
            ps.topology,
            ps.capacity,
            ps.bandwidth,
            {k: frozenset(v) for k, v in hosts.items()},
        )


@dataclass(frozen=True)
class SirVector:
    scores: dict[NodeId, float]
    converged: bool = True
    iterations: int = 0

    def __getitem__(self, n: NodeId) -> float:
        return self.scores[n]

    def ranked(self) -> list[NodeId]:
        """Servers by descending score, ties to the smaller index."""
        return sorted(self.scores, key=lambda n: (-self.scores[n], n.sort_key))

    def total(self) -> float:
        return math.fsum(self.scores.values())


def node_mass(n: NodeId, state: ResidualState, pi: float) -> float:
    t = state.topology
    out_bw = 0.0
    for eid in t.out_edges(n):
        if t.edges[eid].dst.is_surrogate:
            out_bw += max(0.0, state.bandwidth[eid])
    cap = max(0.0, state.capacity[n])
    return (pi * cap) * ((1.0 - pi) * out_bw)


def initial_sir(state: ResidualState, pi: float) -> SirVector:
    """Node masses normalized to a probability vector.

    A single surrogate gets the whole distribution when it has capacity left.

    Raises:
        DegenerateStateError: if every mass is zero.
    """
    servers = state.topology.surrogates
    if len(servers) == 1:
        # a lone server has no surrogate links, so its mass is zero by construction
        if state.capacity[servers[0]] > 0:
            return SirVector({servers[0]: 1.0})
        raise DegenerateStateError("the only surrogate has no residual capacity")
    masses = np.array([node_mass(n, state, pi) for n in servers])
    total = masses.sum()
    if not total > 0:
        raise DegenerateStateError("all surrogate node masses are zero")
    return SirVector(dict(zip(servers, (masses / total).tolist())))


def _transition(t: Topology, servers: tuple[NodeId, ...]):
    """Column-stochastic link matrix over surrogates plus the dangling mask."""
    pos = {n: i for i, n in enumerate(servers)}
    size = len(servers)
    link = np.zeros((size, size))
    dangling = np.zeros(size, dtype=bool)
    for i, n in enumerate(servers):
        nbrs = t.surrogate_neighbors(n)
        if not nbrs:
            dangling[i] = True
            continue
        for a in nbrs:
            link[pos[a], i] += 1.0 / len(nbrs)
    return link, dangling


def personalized_sir(state: ResidualState, k: int, params: SirParams, pi: float | None = None) -> SirVector:
    """Fixed point of the instance-biased rank recursion for VNF type ``k``.

    Sweeps from the initial (mass-based) SIR until the L1 change drops below
    ``params.convergence_tol``; on hitting ``max_iterations`` the last iterate is
    returned with ``converged=False``.
    """
    t = state.topology
    servers = t.surrogates
    if not servers:
        raise ValueError("no surrogate servers")
    size = len(servers)
    psi = params.damping
    hosting = state.hosts.get(k, frozenset())
    gamma = np.array([params.instance_weight if n in hosting else 1.0 for n in servers])
    teleport = gamma * (1.0 - psi) / size
    link, dangling = _transition(t, servers)

    try:
        start = initial_sir(state, params.capacity_weight if pi is None else pi)
        phi = np.array([start.scores[n] for n in servers])
    except DegenerateStateError:
        phi = np.full(size, 1.0 / size)

    # Gauss-Seidel sweeps: same fixed point as the plain power step, but each
    # entry sees the values already updated in this sweep, which keeps periodic
    # graphs (a 2-cycle contracts at only psi per plain step) inside the cap
    rows = [link[i] for i in range(size)]
    target = float(teleport.sum()) / (1.0 - psi)
    converged = False
    it = 0
    for it in range(1, params.max_iterations + 1):
        old = phi.copy()
        spill = phi[dangling].sum() / size
        for i in range(size):
            v = teleport[i] + psi * (float(rows[i] @ phi) + spill)
            if dangling[i]:
                spill += (v - phi[i]) / size
            phi[i] = v
        # the fixed point's total is known in closed form (mean of the teleport
        # weights), so pinning each sweep to it removes the drift a sweep introduces
        phi *= target / phi.sum()
        delta = np.abs(phi - old).sum()
        if delta < params.convergence_tol:
            converged = True
            break
    # every entry of the fixed point is at least its teleport term; rescaling can
    # undershoot that by rounding on nodes nobody links to
    phi = np.maximum(phi, teleport)
    return SirVector(dict(zip(servers, phi.tolist())), converged, it)


def content_penalty(
    w: NodeId,
    n: NodeId,
    req: ServiceRequest,
    mu: float,
    t: Topology,
    overlay: LogicalOverlay | None = None,
) -> float:
    """Quadratic penalty of serving ``req`` from content server ``w`` into head host ``n``.

    The delay is the least-delay path's per-Gbps delay scaled by the request
    load, so it is in ms like the threshold. Unreachable pairs give ``inf``.
    """
    le = overlay(w, n) if overlay is not None else logical_edge(t, w, n)
    if le is None:
        return math.inf
    return mu * (le.delay * req.load / req.delay_threshold) ** 2
