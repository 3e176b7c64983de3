"""CPVNF: rank-driven greedy placement and chaining of VNF chains.

Requests are handled one at a time in ranked order. The head VNF goes to the
surrogate with the best compound score (SIR plus inverse content penalty),
which also fixes the content server; later VNFs go to the best-ranked
surrogate with room and a feasible route from the previous host. Legs are
routed on the lowest-delay path among ``k_paths`` bandwidth-feasible ones.
A request whose end-to-end delay misses its threshold is retried with a
smaller capacity weight, and rejected after ``stop`` retries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .paths import k_shortest_paths
from .placement import (
    ChainMapping,
    LogicalOverlay,
    PlacementSolution,
    PlacementState,
    service_delay,
)
from .sir import ResidualState, SirParams, SirVector, content_penalty, personalized_sir
from .topology import NodeId, Topology
from .workload import ServiceRequest, Workload, rank_requests

__all__ = [
    "CpvnfParams",
    "RequestOutcome",
    "HeadChoice",
    "CpvnfResult",
    "place_all",
    "place_request",
    "select_head_host",
]


@dataclass(frozen=True)
class CpvnfParams:
    sir: SirParams = field(default_factory=SirParams)
    k_paths: int = 5
    stop: int = 3
    pi_decay: float = 0.5
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.k_paths < 1:
            raise ValueError("k_paths must be >= 1")
        if self.stop < 0:
            raise ValueError("stop must be >= 0")
        if not 0 < self.pi_decay < 1:
            raise ValueError("pi_decay must be in (0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class RequestOutcome:
    user: NodeId
    accepted: bool
    mapping: ChainMapping | None
    retries_used: int
    reason: str = ""

    @property
    def status(self) -> str:
        return "accepted" if self.accepted else "rejected"


@dataclass(frozen=True)
class HeadChoice:
    server: NodeId
    content_server: NodeId
    score: float


@dataclass
class CpvnfResult:
    solution: PlacementSolution
    outcomes: list[RequestOutcome]

    @property
    def retries_total(self) -> int:
        return sum(o.retries_used for o in self.outcomes)


class _Stuck(Exception):
    pass


def _route(state: PlacementState, src: NodeId, dst: NodeId, load: float, k_paths: int):
    paths = k_shortest_paths(state.topology, src, dst, k_paths, load, state.bandwidth)
    if not paths:
        return None
    return min(paths, key=lambda p: p.delay).edges


def select_head_host(
    state: PlacementState,
    req: ServiceRequest,
    params: CpvnfParams,
    sir: SirVector | None = None,
    overlay: LogicalOverlay | None = None,
    pi: float | None = None,
) -> HeadChoice | None:
    """Best (surrogate, content server) pair for the head VNF, or None.

    Pairs are scored ``phi + 1 / (Q + epsilon)``; a pair is eligible only when
    the surrogate can take the head VNF and the content server has a
    bandwidth-feasible route to it.
    """
    t = state.topology
    overlay = overlay or LogicalOverlay(t)
    if sir is None:
        sir = personalized_sir(ResidualState.of(state), req.head, params.sir, pi)
    mu = params.sir.penalty_coeff
    scored = []
    for n in t.surrogates:
        for w in sorted(req.content_servers):
            q = content_penalty(w, n, req, mu, t, overlay)
            if math.isinf(q):
                continue
            scored.append((-(sir[n] + 1.0 / (q + params.epsilon)), n.sort_key, w.sort_key, n, w))
    scored.sort(key=lambda x: x[:3])
    for neg, _, _, n, w in scored:
        if state.slot_for(req.head, n, req.load) is None:
            continue
        if _route(state, w, n, req.load, params.k_paths) is None:
            continue
        if len(req.chain) == 1 and _route(state, n, req.user, req.load, params.k_paths) is None:
            continue
        return HeadChoice(n, w, -neg)
    return None


def _attempt(state: PlacementState, req: ServiceRequest, params: CpvnfParams, pi: float, overlay) -> ChainMapping:
    load = req.load
    head = select_head_host(state, req, params, None, overlay, pi)
    if head is None:
        raise _Stuck("no head candidate")
    j = state.slot_for(req.head, head.server, load)
    state.assign(req.head, head.server, j, load)
    first_leg = _route(state, head.content_server, head.server, load, params.k_paths)
    state.reserve_path(first_leg, load)
    hops = [(req.head, head.server, j)]
    legs = [first_leg]
    prev = head.server

    for pos in range(1, len(req.chain)):
        k = req.chain[pos]
        last = pos == len(req.chain) - 1
        sir = personalized_sir(ResidualState.of(state), k, params.sir, pi)
        for cand in sir.ranked():
            j = state.slot_for(k, cand, load)
            if j is None:
                continue
            leg = _route(state, prev, cand, load, params.k_paths)
            if leg is None:
                continue
            if last and _route(state, cand, req.user, load, params.k_paths) is None:
                continue
            break
        else:
            raise _Stuck(f"no host for VNF {k}")
        state.assign(k, cand, j, load)
        state.reserve_path(leg, load)
        hops.append((k, cand, j))
        legs.append(leg)
        prev = cand

    last_leg = _route(state, prev, req.user, load, params.k_paths)
    if last_leg is None:
        raise _Stuck("no route to end-user")
    state.reserve_path(last_leg, load)
    legs.append(last_leg)
    return ChainMapping(req, head.content_server, tuple(hops), tuple(legs))


def place_request(
    state: PlacementState,
    req: ServiceRequest,
    params: CpvnfParams,
    overlay: LogicalOverlay | None = None,
) -> RequestOutcome:
    """Map one request, committing its reservations to ``state`` only on success."""
    overlay = overlay or LogicalOverlay(state.topology)
    pi = params.sir.capacity_weight
    reason = ""
    for attempt in range(params.stop + 1):
        trial = state.copy()
        try:
            mapping = _attempt(trial, req, params, pi, overlay)
        except _Stuck as exc:
            reason = str(exc)
        else:
            if service_delay(mapping, state.topology, state.types) <= req.delay_threshold:
                trial.mappings[req.user] = mapping
                state.__dict__.update(trial.__dict__)
                return RequestOutcome(req.user, True, mapping, attempt)
            reason = "delay threshold exceeded"
        if attempt < params.stop:
            pi *= params.pi_decay
    state.rejected.add(req.user)
    return RequestOutcome(req.user, False, None, params.stop, reason)


def place_all(t: Topology, w: Workload, params: CpvnfParams | None = None) -> CpvnfResult:
    params = params or CpvnfParams()
    state = PlacementState(t, w)
    overlay = LogicalOverlay(t)
    outcomes = [place_request(state, req, params, overlay) for req in rank_requests(w)]
    return CpvnfResult(state.to_solution(), outcomes)
