"""Exact desk-scale solver: depth-first branch and bound over placements.

Every request must be served. Decisions are taken request by request (in
ranked order) and chain position by chain position: the content server
together with the head host, then one (server, instance) pair per VNF.
Chain legs follow logical edges, i.e. least-delay physical paths, so routing
is derived from the hosts. Instance indices are handed out smallest-free
first, which removes relabelling symmetry without losing optima.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .placement import (
    DELAY_TOL,
    LOAD_TOL,
    ChainMapping,
    CostBreakdown,
    InstanceSlot,
    LogicalOverlay,
    PlacementSolution,
    _cost_unchecked,
    check_feasibility,
    compute_residual,
    service_delay,
)
from .paths import BW_TOL
from .topology import NodeId, Topology
from .workload import Workload, rank_requests

__all__ = ["SearchBudget", "ExactResult", "PartialAssignment", "solve_exact", "lower_bound", "root_assignment"]

PRUNE_RTOL = 1e-7


@dataclass(frozen=True)
class SearchBudget:
    max_nodes_expanded: int = 5_000_000
    time_limit: float = 60.0

    def __post_init__(self):
        if self.max_nodes_expanded < 1 or not self.time_limit > 0:
            raise ValueError("budget limits must be positive")


@dataclass
class ExactResult:
    status: str  # "optimal", "infeasible" or "budget_exhausted"
    solution: PlacementSolution | None
    cost: CostBreakdown | None
    proven_optimal: bool
    nodes_expanded: int

    @property
    def feasible(self) -> bool:
        return self.solution is not None


class _Context:
    """Read-only data shared by every node of one search."""

    def __init__(self, t: Topology, w: Workload):
        self.topology = t
        self.workload = w
        self.types = w.types
        self.requests = rank_requests(w)
        self.overlay = LogicalOverlay(t)
        self.surrogates = t.surrogates
        attrs = t.surrogate_attrs
        self.instance_floor = {}
        for k, vt in self.types.items():
            fits = [attrs[n].operational_cost_per_unit for n in self.surrogates if attrs[n].capacity >= vt.resource_requirement]
            self.instance_floor[k] = vt.license_cost + vt.resource_requirement * min(fits) if fits else math.inf
        self.head_comm_floor = []
        self.tail_comm_floor = []
        for r in self.requests:
            heads = [
                r.load * le.hop_count * t.bandwidth_cost_from(wc)
                for wc in r.content_servers
                for n in self.surrogates
                if (le := self.overlay(wc, n)) is not None
            ]
            tails = [
                r.load * le.hop_count * t.bandwidth_cost_from(n)
                for n in self.surrogates
                if (le := self.overlay(n, r.user)) is not None
            ]
            self.head_comm_floor.append(min(heads) if heads else math.inf)
            self.tail_comm_floor.append(min(tails) if tails else math.inf)


class PartialAssignment:
    """A node of the search tree: every decision up to (request, position)."""

    __slots__ = (
        "ctx", "req_idx", "pos", "loads", "inst_server", "used_cap", "edge_load",
        "committed", "cur_w", "cur_hops", "cur_legs", "done", "key", "_bound",
    )

    def __init__(self, ctx: _Context):
        self.ctx = ctx
        self.req_idx = 0
        self.pos = 0
        self.loads: dict[tuple, float] = {}
        self.inst_server: dict[tuple[int, int], NodeId] = {}
        self.used_cap: dict[NodeId, float] = {}
        self.edge_load: dict[int, float] = {}
        self.committed = 0.0
        self.cur_w: NodeId | None = None
        self.cur_hops: tuple = ()
        self.cur_legs: tuple = ()
        self.done: tuple[ChainMapping, ...] = ()
        self.key: tuple = ()
        self._bound: float | None = None

    def _clone(self) -> "PartialAssignment":
        c = PartialAssignment.__new__(PartialAssignment)
        c.ctx = self.ctx
        c.req_idx = self.req_idx
        c.pos = self.pos
        c.loads = dict(self.loads)
        c.inst_server = dict(self.inst_server)
        c.used_cap = dict(self.used_cap)
        c.edge_load = dict(self.edge_load)
        c.committed = self.committed
        c.cur_w = self.cur_w
        c.cur_hops = self.cur_hops
        c.cur_legs = self.cur_legs
        c.done = self.done
        c.key = self.key
        c._bound = None
        return c

    @property
    def complete(self) -> bool:
        return self.req_idx >= len(self.ctx.requests)

    # -- expansion -------------------------------------------------------

    def _instance_options(self, k: int, n: NodeId, load: float):
        vt = self.ctx.types[k]
        opts = []
        used_j = []
        for (kk, j), server in self.inst_server.items():
            if kk != k:
                continue
            used_j.append(j)
            if server == n and self.loads[(k, n, j)] + load <= vt.processing_capacity + LOAD_TOL:
                opts.append(j)
        if len(used_j) < vt.max_instances and load <= vt.processing_capacity + LOAD_TOL:
            cap = self.ctx.topology.surrogate_attrs[n].capacity
            if self.used_cap.get(n, 0.0) + vt.resource_requirement <= cap + LOAD_TOL:
                taken = set(used_j)
                opts.append(next(j for j in range(vt.max_instances) if j not in taken))
        return sorted(opts)

    def _leg(self, a: NodeId, b: NodeId, load: float):
        le = self.ctx.overlay(a, b)
        if le is None:
            return None
        t = self.ctx.topology
        for eid in le.path:
            if self.edge_load.get(eid, 0.0) + load > t.edges[eid].bandwidth_gbps + BW_TOL:
                return None
        return le

    def _with_leg(self, le, load: float, sender: NodeId) -> None:
        for eid in le.path:
            self.edge_load[eid] = self.edge_load.get(eid, 0.0) + load
        self.cur_legs = self.cur_legs + (le.path,)
        self.committed += load * le.hop_count * self.ctx.topology.bandwidth_cost_from(sender)

    def _partial_delay(self, req) -> float:
        t = self.ctx.topology
        per_unit = sum(t.edges[eid].delay for p in self.cur_legs for eid in p)
        per_unit += sum(self.ctx.types[k].delay_on(n) for k, n, _ in self.cur_hops)
        return req.load * per_unit

    def children(self) -> list["PartialAssignment"]:
        """Feasible one-step extensions in increasing (bound, tie-break key) order."""
        if self.complete:
            return []
        ctx = self.ctx
        t = ctx.topology
        req = ctx.requests[self.req_idx]
        k = req.chain[self.pos]
        last = self.pos == len(req.chain) - 1
        load = req.load
        sources = sorted(req.content_servers) if self.pos == 0 else [self.cur_hops[-1][1]]
        out = []
        for src in sources:
            for n in ctx.surrogates:
                for j in self._instance_options(k, n, load):
                    child = self._extend(req, k, src, n, j, last)
                    if child is not None:
                        out.append(child)
        out.sort(key=lambda c: (lower_bound(c), c._order_key()))
        return out

    def _order_key(self):
        return self.key + ((self.cur_w.sort_key if self.cur_w else (), tuple(h[1].sort_key for h in self.cur_hops), tuple(h[2] for h in self.cur_hops)),)

    def _extend(self, req, k, src, n, j, last):
        le = self._leg(src, n, req.load)
        if le is None:
            return None
        c = self._clone()
        t = self.ctx.topology
        vt = self.ctx.types[k]
        if self.pos == 0:
            c.cur_w = src
        c._with_leg(le, req.load, src)
        key = (k, n, j)
        if key not in c.loads:
            c.loads[key] = 0.0
            c.inst_server[(k, j)] = n
            if n not in c.used_cap:
                c.committed += t.surrogate_attrs[n].site_license_cost
            c.used_cap[n] = c.used_cap.get(n, 0.0) + vt.resource_requirement
            c.committed += vt.license_cost + vt.resource_requirement * t.surrogate_attrs[n].operational_cost_per_unit
        c.loads[key] += req.load
        c.cur_hops = c.cur_hops + ((k, n, j),)
        if last:
            tail = c._leg(n, req.user, req.load)
            if tail is None:
                return None
            c._with_leg(tail, req.load, n)
            mapping = ChainMapping(req, c.cur_w, c.cur_hops, c.cur_legs)
            if service_delay(mapping, t, self.ctx.types) > req.delay_threshold + DELAY_TOL:
                return None
            c.done = c.done + (mapping,)
            c.key = c._order_key()
            c.req_idx += 1
            c.pos = 0
            c.cur_w = None
            c.cur_hops = ()
            c.cur_legs = ()
        else:
            if c._partial_delay(req) > req.delay_threshold * (1 + 1e-9) + 1e-6:
                return None
            c.pos += 1
        return c

    def to_solution(self) -> PlacementSolution:
        slots = {key: InstanceSlot(key[0], key[1], key[2], load) for key, load in self.loads.items()}
        mappings = {m.user: m for m in self.done}
        residual = compute_residual(self.ctx.topology, self.ctx.workload, slots.values(), mappings.values())
        return PlacementSolution(slots, mappings, set(), residual)


def root_assignment(t: Topology, w: Workload) -> PartialAssignment:
    return PartialAssignment(_Context(t, w))


def lower_bound(p: PartialAssignment) -> float:
    """Admissible estimate of the cheapest completion of ``p``.

    Committed cost plus: new instances forced by the remaining load of each
    VNF type, new servers forced by their vCPU, and the cheapest content and
    delivery legs still to be routed. Returns ``inf`` when no completion can
    respect the instance or server limits.
    """
    if p._bound is None:
        p._bound = _lower_bound(p)
    return p._bound


def _lower_bound(p: PartialAssignment) -> float:
    ctx = p.ctx
    t = ctx.topology
    bound = p.committed
    demand: dict[int, float] = {}
    for ri in range(p.req_idx, len(ctx.requests)):
        req = ctx.requests[ri]
        start = p.pos if ri == p.req_idx else 0
        for k in req.chain[start:]:
            demand[k] = demand.get(k, 0.0) + req.load
        if start == 0:
            bound += ctx.head_comm_floor[ri]
        bound += ctx.tail_comm_floor[ri]
    if math.isinf(bound):
        return math.inf

    vcpu_needed = 0.0
    for k, d in demand.items():
        vt = ctx.types[k]
        existing = [key for key in p.loads if key[0] == k]
        spare = sum(vt.processing_capacity - p.loads[key] for key in existing)
        new = max(0, math.ceil((d - spare) / vt.processing_capacity - 1e-9))
        if len(existing) + new > vt.max_instances:
            return math.inf
        if new:
            bound += new * ctx.instance_floor[k]
            vcpu_needed += new * vt.resource_requirement

    attrs = t.surrogate_attrs
    spare_used = sum(attrs[n].capacity - used for n, used in p.used_cap.items())
    deficit = vcpu_needed - spare_used
    if deficit > LOAD_TOL:
        unused = sorted((n for n in ctx.surrogates if n not in p.used_cap), key=lambda n: -attrs[n].capacity)
        covered = 0.0
        m = 0
        for n in unused:
            if covered + LOAD_TOL >= deficit:
                break
            covered += attrs[n].capacity
            m += 1
        if covered + LOAD_TOL < deficit:
            return math.inf
        bound += m * min(attrs[n].site_license_cost for n in unused)
    return bound


def solve_exact(
    t: Topology,
    w: Workload,
    budget: SearchBudget | None = None,
    use_bound: bool = True,
) -> ExactResult:
    """Minimum-cost placement serving every request.

    With ``use_bound=False`` the search is exhaustive (feasibility pruning
    only). Equal-cost optima resolve to the lexicographically smallest
    (content server, hosts, instance indices) sequence over ranked requests.
    """
    budget = budget or SearchBudget()
    root = root_assignment(t, w)
    deadline = time.monotonic() + budget.time_limit
    best: list = [math.inf, None, None]  # total, key, node
    expanded = 0
    exhausted = False

    def visit(node: PartialAssignment) -> None:
        nonlocal expanded, exhausted
        if exhausted:
            return
        if node.complete:
            total = _cost_unchecked(node.to_solution(), t, w).total
            if total < best[0] or (total == best[0] and node.key < best[1]):
                best[:] = [total, node.key, node]
            return
        expanded += 1
        if expanded > budget.max_nodes_expanded or (expanded % 512 == 0 and time.monotonic() > deadline):
            exhausted = True
            return
        for child in node.children():
            if use_bound and best[2] is not None:
                if lower_bound(child) > best[0] + PRUNE_RTOL * max(1.0, abs(best[0])):
                    continue
            visit(child)

    visit(root)
    node = best[2]
    if node is None:
        status = "budget_exhausted" if exhausted else "infeasible"
        return ExactResult(status, None, None, not exhausted, expanded)
    solution = node.to_solution()
    violations = check_feasibility(solution, t, w)
    if violations:
        raise RuntimeError(f"exact search produced an infeasible solution: {violations}")
    cost = _cost_unchecked(solution, t, w)
    return ExactResult(
        "budget_exhausted" if exhausted else "optimal", solution, cost, not exhausted, expanded
    )
