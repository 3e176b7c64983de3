"""Placement solutions, the constraint checker, and the cost/delay accountants.

A chain edge maps to one logical edge, which is a routed physical path;
bandwidth is charged on every physical edge of every routed path, including
the content-server leg and the delivery leg to the end-user.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .paths import BW_TOL, least_delay_path, path_nodes
from .topology import NodeId, Topology, Violation
from .workload import ServiceRequest, VnfType, Workload

__all__ = [
    "InstanceSlot",
    "ChainMapping",
    "Residual",
    "PlacementSolution",
    "PlacementState",
    "CostBreakdown",
    "Metrics",
    "LogicalEdge",
    "LogicalOverlay",
    "InfeasibleSolutionError",
    "StructuralError",
    "logical_edge",
    "bandwidth_cost",
    "service_delay",
    "check_feasibility",
    "compute_cost",
    "compute_metrics",
    "compute_residual",
    "solution_to_dict",
    "solution_from_dict",
    "save_solution",
    "load_solution",
]

LOAD_TOL = 1e-9
DELAY_TOL = 1e-9

SlotKey = tuple  # (vnf_type, server, instance_index)


class InfeasibleSolutionError(ValueError):
    """Raised when costing a solution that violates constraints."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        kinds = sorted({v.kind for v in violations})
        super().__init__(f"solution has {len(violations)} violation(s): {', '.join(kinds)}")


class StructuralError(ValueError):
    pass


@dataclass(frozen=True)
class InstanceSlot:
    vnf_type: int
    server: NodeId
    instance_index: int
    assigned_load: float = 0.0

    @property
    def key(self) -> SlotKey:
        return (self.vnf_type, self.server, self.instance_index)


@dataclass(frozen=True)
class ChainMapping:
    request: ServiceRequest
    content_server: NodeId
    hops: tuple[tuple[int, NodeId, int], ...]
    routed_paths: tuple[tuple[int, ...], ...]

    @property
    def user(self) -> NodeId:
        return self.request.user

    @property
    def hosts(self) -> tuple[NodeId, ...]:
        return tuple(h[1] for h in self.hops)

    def legs(self) -> list[tuple[NodeId, NodeId]]:
        """Endpoint pairs of the routed paths: content->head, chain edges, tail->user."""
        points = [self.content_server, *self.hosts, self.user]
        return list(zip(points[:-1], points[1:]))


@dataclass
class Residual:
    capacity: dict[NodeId, float]
    bandwidth: dict[int, float]

    def close_to(self, other: "Residual", tol: float = 1e-9) -> bool:
        if self.capacity.keys() != other.capacity.keys() or self.bandwidth.keys() != other.bandwidth.keys():
            return False
        return all(abs(self.capacity[n] - other.capacity[n]) <= tol for n in self.capacity) and all(
            abs(self.bandwidth[e] - other.bandwidth[e]) <= tol for e in self.bandwidth
        )


@dataclass
class PlacementSolution:
    slots: dict[SlotKey, InstanceSlot] = field(default_factory=dict)
    mappings: dict[NodeId, ChainMapping] = field(default_factory=dict)
    rejected: set[NodeId] = field(default_factory=set)
    residual: Residual | None = None

    @property
    def used_servers(self) -> set[NodeId]:
        return {s.server for s in self.slots.values()}


@dataclass(frozen=True)
class LogicalEdge:
    delay: float  # ms per Gbps
    hop_count: int
    path: tuple[int, ...]


@dataclass(frozen=True)
class CostBreakdown:
    vnf_license: float
    site_license: float
    operational: float
    communication: float

    @property
    def total(self) -> float:
        return self.vnf_license + self.site_license + self.operational + self.communication

    @property
    def operational_grouped(self) -> float:
        """Server usage plus VNF and site licenses, as reported in metrics."""
        return self.vnf_license + self.site_license + self.operational


@dataclass(frozen=True)
class Metrics:
    servers_used: int
    content_servers_used: int
    vnf_license: float
    site_license: float
    server_usage: float
    operational_cost: float
    communication_cost: float
    total_cost: float
    avg_response_time: float | None
    accepted: int
    rejected: int
    runtime: float


# -- elementary accountants --------------------------------------------------


def logical_edge(t: Topology, u: NodeId, v: NodeId) -> LogicalEdge | None:
    """Least-delay physical path between two nodes, or None if unreachable."""
    if u == v:
        return LogicalEdge(0.0, 0, ())
    p = least_delay_path(t, u, v)
    if p is None:
        return None
    return LogicalEdge(p.delay, p.hop_count, p.edges)


class LogicalOverlay:
    """Memoized ``logical_edge`` lookups over one immutable topology."""

    def __init__(self, t: Topology):
        self.topology = t
        self._cache: dict[tuple[NodeId, NodeId], LogicalEdge | None] = {}

    def __call__(self, u: NodeId, v: NodeId) -> LogicalEdge | None:
        key = (u, v)
        if key not in self._cache:
            self._cache[key] = logical_edge(self.topology, u, v)
        return self._cache[key]


def bandwidth_cost(load: float, hop_count: int, per_unit_cost: float) -> float:
    return load * hop_count * per_unit_cost


def _path_delay(t: Topology, edges: Iterable[int]) -> float:
    return sum(t.edges[eid].delay for eid in edges)


def _path_hops(t: Topology, edges: Iterable[int]) -> int:
    return sum(t.edges[eid].hop_count for eid in edges)


def service_delay(m: ChainMapping, t: Topology, catalog: Mapping[int, VnfType] | Iterable[VnfType]) -> float:
    """End-to-end delay in ms of a mapped request; every VNF processes once."""
    types = _types(catalog)
    if len(m.routed_paths) != len(m.hops) + 1:
        raise StructuralError(
            f"{m.user}: expected {len(m.hops) + 1} routed paths, got {len(m.routed_paths)}"
        )
    per_unit = sum(_path_delay(t, p) for p in m.routed_paths)
    per_unit += sum(types[k].delay_on(n) for k, n, _ in m.hops)
    return m.request.load * per_unit


def _types(catalog) -> Mapping[int, VnfType]:
    if isinstance(catalog, Mapping):
        return catalog
    if isinstance(catalog, Workload):
        return catalog.types
    return {v.id: v for v in catalog}


def compute_residual(t: Topology, w: Workload, slots: Iterable[InstanceSlot], mappings: Iterable[ChainMapping]) -> Residual:
    types = w.types
    cap = {n: a.capacity for n, a in t.surrogate_attrs.items()}
    for s in slots:
        if s.server in cap:
            cap[s.server] -= types[s.vnf_type].resource_requirement
    bw = {eid: e.bandwidth_gbps for eid, e in enumerate(t.edges)}
    for m in mappings:
        for p in m.routed_paths:
            for eid in p:
                if eid in bw:
                    bw[eid] -= m.request.load
    return Residual(cap, bw)


# -- feasibility ---------------------------------------------------------------


def check_feasibility(s: PlacementSolution, t: Topology, w: Workload) -> list[Violation]:
    """Every constraint violation in ``s``; an empty list means feasible."""
    out: list[Violation] = []
    types = w.types
    requests = {r.user: r for r in w.requests}
    surrogates = set(t.surrogates)

    for u in s.mappings.keys() | s.rejected:
        if u not in requests:
            out.append(Violation("unknown-request", (u,)))
    for u in requests:
        if u in s.mappings and u in s.rejected:
            out.append(Violation("double-accounting", (u,), "both mapped and rejected"))
        elif u not in s.mappings and u not in s.rejected:
            out.append(Violation("unaccounted-request", (u,)))

    # slot sanity
    placed_on: dict[tuple[int, int], NodeId] = {}
    for key, slot in s.slots.items():
        if key != slot.key:
            out.append(Violation("slot-bookkeeping", (key,), "slot key mismatch"))
        k, n, j = slot.key
        if k not in types:
            out.append(Violation("unknown-vnf-type", (key,)))
            continue
        if n not in surrogates:
            out.append(Violation("non-surrogate-host", (key,)))
        if not 0 <= j < types[k].max_instances:
            out.append(Violation("instance-index", (key,), f"index {j} outside I_{k}"))
        other = placed_on.setdefault((k, j), n)
        if other != n:
            out.append(Violation("instance-uniqueness", (k, j), f"on {other} and {n}"))

    inst_load: dict[SlotKey, float] = {}
    edge_load: dict[int, float] = {}
    for u, m in sorted(s.mappings.items()):
        r = requests.get(u)
        if r is None:
            continue
        if m.request != r:
            out.append(Violation("request-mismatch", (u,)))
        if m.content_server not in r.content_servers:
            out.append(Violation("content-selection", (u, m.content_server)))
        if len(m.hops) != len(r.chain) or any(h[0] != k for h, k in zip(m.hops, r.chain)):
            out.append(Violation("chain-structure", (u,), "hops do not follow the chain"))
            continue
        for k, n, j in m.hops:
            if (k, n, j) not in s.slots:
                out.append(Violation("instance-missing", (u, (k, n, j))))
            inst_load[(k, n, j)] = inst_load.get((k, n, j), 0.0) + r.load
        legs = m.legs()
        if len(m.routed_paths) != len(legs):
            out.append(Violation("routing", (u,), "wrong number of routed paths"))
            continue
        routing_ok = True
        for (a, b), p in zip(legs, m.routed_paths):
            if not _path_connects(t, a, b, p):
                out.append(Violation("routing", (u, a, b), f"path {list(p)} does not connect"))
                routing_ok = False
            for eid in p:
                if 0 <= eid < len(t.edges):
                    edge_load[eid] = edge_load.get(eid, 0.0) + r.load
        if routing_ok and all(k in types for k in r.chain):
            delay = service_delay(m, t, types)
            if delay > r.delay_threshold + DELAY_TOL:
                out.append(
                    Violation("delay", (u,), f"{delay:.6g} ms > threshold {r.delay_threshold:.6g} ms")
                )

    for key, load in sorted(inst_load.items(), key=lambda kv: (kv[0][0], kv[0][1].sort_key, kv[0][2])):
        k = key[0]
        if k in types and load > types[k].processing_capacity + LOAD_TOL:
            out.append(
                Violation("instance-capacity", (key,), f"load {load:.6g} > P_k {types[k].processing_capacity:.6g}")
            )
    for key, slot in s.slots.items():
        expected = inst_load.get(key, 0.0)
        if abs(slot.assigned_load - expected) > LOAD_TOL:
            out.append(Violation("slot-bookkeeping", (key,), f"assigned_load {slot.assigned_load} != {expected}"))

    used: dict[NodeId, float] = {}
    for slot in s.slots.values():
        if slot.vnf_type in types:
            used[slot.server] = used.get(slot.server, 0.0) + types[slot.vnf_type].resource_requirement
    for n, amount in sorted(used.items()):
        attrs = t.surrogate_attrs.get(n)
        if attrs is not None and amount > attrs.capacity + LOAD_TOL:
            out.append(Violation("server-capacity", (n,), f"{amount:g} vCPU > C_n {attrs.capacity:g}"))

    for eid, load in sorted(edge_load.items()):
        cap = t.edges[eid].bandwidth_gbps
        if load > cap + BW_TOL:
            out.append(Violation("edge-bandwidth", (eid,), f"{load:.6g} Gbps > {cap:.6g} Gbps"))

    if s.residual is not None:
        fresh = compute_residual(t, w, s.slots.values(), (m for u, m in s.mappings.items() if u in requests))
        if not fresh.close_to(s.residual):
            out.append(Violation("residual-drift", (), "stored residual differs from recomputation"))
    return out


def _path_connects(t: Topology, a: NodeId, b: NodeId, edges: tuple[int, ...]) -> bool:
    if a == b:
        return len(edges) == 0
    if not edges:
        return False
    if any(not 0 <= eid < len(t.edges) for eid in edges):
        return False
    nodes = path_nodes(t, a, edges)
    for eid, node in zip(edges, nodes):
        if t.edges[eid].src != node:
            return False
    if nodes[-1] != b or len(set(nodes)) != len(nodes):
        return False
    return all(n.is_surrogate for n in nodes[1:-1])


# -- cost ---------------------------------------------------------------------


def _cost_unchecked(s: PlacementSolution, t: Topology, w: Workload) -> CostBreakdown:
    types = w.types
    vnf_license = math.fsum(types[sl.vnf_type].license_cost for sl in s.slots.values())
    site = math.fsum(t.surrogate_attrs[n].site_license_cost for n in s.used_servers)
    operational = math.fsum(
        types[sl.vnf_type].resource_requirement * t.surrogate_attrs[sl.server].operational_cost_per_unit
        for sl in s.slots.values()
    )
    comm_terms = []
    for m in s.mappings.values():
        for (a, _b), p in zip(m.legs(), m.routed_paths):
            comm_terms.append(bandwidth_cost(m.request.load, _path_hops(t, p), t.bandwidth_cost_from(a)))
    return CostBreakdown(vnf_license, site, operational, math.fsum(comm_terms))


def compute_cost(s: PlacementSolution, t: Topology, w: Workload) -> CostBreakdown:
    """Cost components of a feasible solution.

    Raises:
        InfeasibleSolutionError: if ``check_feasibility`` reports violations.
    """
    violations = check_feasibility(s, t, w)
    if violations:
        raise InfeasibleSolutionError(violations)
    return _cost_unchecked(s, t, w)


def compute_metrics(s: PlacementSolution, t: Topology, w: Workload, runtime: float = 0.0) -> Metrics:
    cost = compute_cost(s, t, w)
    types = w.types
    delays = [service_delay(m, t, types) for m in s.mappings.values()]
    return Metrics(
        servers_used=len(s.used_servers),
        content_servers_used=len({m.content_server for m in s.mappings.values()}),
        vnf_license=cost.vnf_license,
        site_license=cost.site_license,
        server_usage=cost.operational,
        operational_cost=cost.operational_grouped,
        communication_cost=cost.communication,
        total_cost=cost.operational_grouped + cost.communication,
        avg_response_time=(math.fsum(delays) / len(delays)) if delays else None,
        accepted=len(s.mappings),
        rejected=len(s.rejected),
        runtime=runtime,
    )


# -- mutable bookkeeping shared by the solvers -----------------------------------------


class PlacementState:
    """Residual capacities and instance loads while a solver builds a solution."""

    def __init__(self, t: Topology, w: Workload):
        self.topology = t
        self.workload = w
        self.types = w.types
        self.capacity = {n: a.capacity for n, a in t.surrogate_attrs.items()}
        self.bandwidth = {eid: e.bandwidth_gbps for eid, e in enumerate(t.edges)}
        self.loads: dict[SlotKey, float] = {}
        self.mappings: dict[NodeId, ChainMapping] = {}
        self.rejected: set[NodeId] = set()

    def copy(self) -> "PlacementState":
        other = PlacementState.__new__(PlacementState)
        other.topology = self.topology
        other.workload = self.workload
        other.types = self.types
        other.capacity = dict(self.capacity)
        other.bandwidth = dict(self.bandwidth)
        other.loads = dict(self.loads)
        other.mappings = dict(self.mappings)
        other.rejected = set(self.rejected)
        return other

    def instances(self, k: int) -> list[SlotKey]:
        return sorted((key for key in self.loads if key[0] == k), key=lambda x: (x[1].sort_key, x[2]))

    def hosts_type(self, k: int, n: NodeId) -> bool:
        return any(key[0] == k and key[1] == n for key in self.loads)

    def free_index(self, k: int) -> int | None:
        taken = {key[2] for key in self.loads if key[0] == k}
        for j in range(self.types[k].max_instances):
            if j not in taken:
                return j
        return None

    def can_open(self, k: int, n: NodeId, load: float) -> bool:
        vt = self.types[k]
        return (
            self.free_index(k) is not None
            and self.capacity.get(n, 0.0) + LOAD_TOL >= vt.resource_requirement
            and load <= vt.processing_capacity + LOAD_TOL
        )

    def spare_instance(self, k: int, n: NodeId, load: float) -> int | None:
        """First-fit existing instance of type ``k`` on ``n`` that can take ``load``."""
        cap = self.types[k].processing_capacity
        for kk, nn, j in self.instances(k):
            if nn == n and self.loads[(kk, nn, j)] + load <= cap + LOAD_TOL:
                return j
        return None

    def slot_for(self, k: int, n: NodeId, load: float) -> int | None:
        j = self.spare_instance(k, n, load)
        if j is None and self.can_open(k, n, load):
            j = self.free_index(k)
        return j

    def assign(self, k: int, n: NodeId, j: int, load: float) -> None:
        key = (k, n, j)
        if key not in self.loads:
            self.capacity[n] -= self.types[k].resource_requirement
            self.loads[key] = 0.0
        self.loads[key] += load

    def reserve_path(self, edges: Iterable[int], load: float) -> None:
        for eid in edges:
            self.bandwidth[eid] -= load

    def to_solution(self) -> PlacementSolution:
        slots = {key: InstanceSlot(key[0], key[1], key[2], load) for key, load in self.loads.items()}
        return PlacementSolution(
            slots,
            dict(self.mappings),
            set(self.rejected),
            Residual(dict(self.capacity), dict(self.bandwidth)),
        )


# -- serialization ---------------------------------------------------------------


def solution_to_dict(s: PlacementSolution) -> dict:
    return {
        "slots": [
            {"vnf_type": sl.vnf_type, "server": str(sl.server), "instance": sl.instance_index, "load": sl.assigned_load}
            for sl in sorted(s.slots.values(), key=lambda x: (x.vnf_type, x.server.sort_key, x.instance_index))
        ],
        "mappings": [
            {
                "user": str(u),
                "content_server": str(m.content_server),
                "hops": [{"vnf_type": k, "server": str(n), "instance": j} for k, n, j in m.hops],
                "routed_paths": [list(p) for p in m.routed_paths],
            }
            for u, m in sorted(s.mappings.items())
        ],
        "rejected": sorted(str(u) for u in s.rejected),
    }


def solution_from_dict(doc: Mapping, w: Workload, t: Topology | None = None) -> PlacementSolution:
    slots = {}
    for raw in doc["slots"]:
        sl = InstanceSlot(int(raw["vnf_type"]), NodeId.parse(raw["server"]), int(raw["instance"]), float(raw["load"]))
        slots[sl.key] = sl
    mappings = {}
    for raw in doc["mappings"]:
        u = NodeId.parse(raw["user"])
        mappings[u] = ChainMapping(
            w.request_for(u),
            NodeId.parse(raw["content_server"]),
            tuple((int(h["vnf_type"]), NodeId.parse(h["server"]), int(h["instance"])) for h in raw["hops"]),
            tuple(tuple(int(e) for e in p) for p in raw["routed_paths"]),
        )
    rejected = {NodeId.parse(u) for u in doc["rejected"]}
    residual = None
    if t is not None:
        residual = compute_residual(t, w, slots.values(), mappings.values())
    return PlacementSolution(slots, mappings, rejected, residual)


def save_solution(s: PlacementSolution, path: str | Path) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(s), indent=2) + "\n", encoding="utf-8")


def load_solution(path: str | Path, w: Workload, t: Topology | None = None) -> PlacementSolution:
    return solution_from_dict(json.loads(Path(path).read_text(encoding="utf-8")), w, t)

