"""Slow, obviously-correct reference implementations used by the tests.

None of these import the solver internals they check: paths come from plain
DFS enumeration, the optimum from exhaustive enumeration of every placement,
and ranks from a dense linear solve.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from vnfcdn.topology import NodeId, Topology
from vnfcdn.workload import Workload


# -- paths ---------------------------------------------------------------------


def all_simple_paths(t: Topology, src: NodeId, dst: NodeId, min_bw: float = 0.0, residual=None):
    """Every loopless src->dst path with surrogate-only transit, as (delay, edges)."""
    if src == dst:
        return [(0.0, ())]
    out = []

    def bw(eid):
        return residual[eid] if residual is not None else t.edges[eid].bandwidth / 1000.0

    def walk(node, seen, edges, delay):
        for eid, e in enumerate(t.edges):
            if e.src != node or e.dst in seen or bw(eid) + 1e-9 < min_bw:
                continue
            d = delay + e.delay
            if e.dst == dst:
                out.append((d, edges + (eid,)))
            elif e.dst.is_surrogate:
                walk(e.dst, seen | {e.dst}, edges + (eid,), d)

    walk(src, {src}, (), 0.0)
    out.sort()
    return out


def least_delay(t: Topology, src: NodeId, dst: NodeId):
    paths = all_simple_paths(t, src, dst)
    return paths[0] if paths else None


# -- exhaustive optimum ---------------------------------------------------------------


def enumerate_optimum(t: Topology, w: Workload) -> float:
    """Minimum total cost over every placement serving all requests, or inf.

    Each (request, VNF) use picks a host and an instance label; labels follow
    restricted growth per type so each grouping of uses into instances is
    visited once. Legs follow least-delay paths.
    """
    types = {v.id: v for v in w.catalog}
    attrs = t.surrogate_attrs
    servers = list(t.surrogates)
    requests = list(w.requests)

    route = {}

    def leg(a, b):
        if (a, b) not in route:
            route[(a, b)] = least_delay(t, a, b)
        return route[(a, b)]

    # decision slots: per request the content server, then one (host, label) per VNF
    per_request = []
    for r in requests:
        options = []
        for wsrv in sorted(r.content_servers):
            for hosts in itertools.product(servers, repeat=len(r.chain)):
                legs = [leg(a, b) for a, b in zip((wsrv, *hosts), (*hosts, r.user))]
                if any(x is None for x in legs):
                    continue
                delay = r.load * (
                    sum(d for d, _ in legs) + sum(types[k].processing_delay[n] for k, n in zip(r.chain, hosts))
                )
                if delay > r.delay_threshold + 1e-9:
                    continue
                options.append((wsrv, hosts, legs))
        per_request.append(options)

    best = math.inf
    for choice in itertools.product(*per_request):
        # uses of each VNF type, in a fixed order, with their hosts
        uses: dict[int, list[tuple[int, NodeId]]] = {}
        for i, (r, (_w, hosts, _legs)) in enumerate(zip(requests, choice)):
            for k, n in zip(r.chain, hosts):
                uses.setdefault(k, []).append((i, n))
        edge_load: dict[int, float] = {}
        for r, (_w, _h, legs) in zip(requests, choice):
            for _d, edges in legs:
                for eid in edges:
                    edge_load[eid] = edge_load.get(eid, 0.0) + r.load
        if any(load > t.edges[eid].bandwidth / 1000.0 + 1e-9 for eid, load in edge_load.items()):
            continue
        comm = []
        for r, (wsrv, hosts, legs) in zip(requests, choice):
            for src, (_d, edges) in zip((wsrv, *hosts), legs):
                hops = sum(t.edges[e].hop_count for e in edges)
                unit = attrs[src].bandwidth_cost_per_unit if src in attrs else t.default_bandwidth_cost
                comm.append(r.load * hops * unit)
        comm_total = math.fsum(comm)

        for groups in itertools.product(*(_groupings(uses[k], types[k], requests) for k in sorted(uses))):
            instances = [inst for g in groups for inst in g]  # (k, server)
            used: dict[NodeId, float] = {}
            for k, n in instances:
                used[n] = used.get(n, 0.0) + types[k].resource_requirement
            if any(v > attrs[n].capacity + 1e-9 for n, v in used.items()):
                continue
            vnf = math.fsum(types[k].license_cost for k, _ in instances)
            site = math.fsum(attrs[n].site_license_cost for n in used)
            op = math.fsum(types[k].resource_requirement * attrs[n].operational_cost_per_unit for k, n in instances)
            total = vnf + site + op + comm_total
            best = min(best, total)
    return best


def _groupings(uses, vt, requests):
    """Feasible ways to pack the uses of one type into co-hosted instances.

    Yields lists of (type, server), one entry per instance.
    """
    out = []

    def rec(i, labels):
        if i == len(uses):
            groups: dict[int, list[int]] = {}
            for idx, lab in enumerate(labels):
                groups.setdefault(lab, []).append(idx)
            insts = []
            for members in groups.values():
                hosts = {uses[m][1] for m in members}
                if len(hosts) != 1:
                    return
                load = sum(requests[uses[m][0]].load for m in members)
                if load > vt.processing_capacity + 1e-9:
                    return
                insts.append((vt.id, hosts.pop()))
            out.append(insts)
            return
        for lab in range(max(labels, default=-1) + 2):
            if lab >= vt.max_instances:
                break
            rec(i + 1, labels + [lab])

    rec(0, [])
    return out


# -- SIR -----------------------------------------------------------------------------


def sir_linear_solve(t: Topology, teleport_weight: dict, damping: float) -> dict:
    """Fixed point of the rank recursion via one dense linear solve.

    ``teleport_weight`` maps each surrogate to its Gamma value.
    """
    servers = list(t.surrogates)
    size = len(servers)
    pos = {n: i for i, n in enumerate(servers)}
    m = np.zeros((size, size))
    for i, n in enumerate(servers):
        nbrs = [t.edges[e].dst for e in t.out_edges(n) if t.edges[e].dst.is_surrogate]
        if nbrs:
            for a in nbrs:
                m[pos[a], i] += 1.0 / len(nbrs)
        else:
            m[:, i] = 1.0 / size
    b = np.array([teleport_weight[n] * (1 - damping) / size for n in servers])
    phi = np.linalg.solve(np.eye(size) - damping * m, b)
    return dict(zip(servers, phi))
