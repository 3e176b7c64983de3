"""Delay-ordered routing over the physical graph.

Paths are tuples of edge ids (positions in ``Topology.edges``). Only surrogate
servers may be transit nodes; content servers and end-users can appear only
as endpoints. Equal-delay paths are ordered by their edge-id sequence.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Mapping

from .topology import NodeId, Topology

__all__ = ["RoutedPath", "k_shortest_paths", "least_delay_path", "path_nodes", "make_path"]

BW_TOL = 1e-9


@dataclass(frozen=True)
class RoutedPath:
    src: NodeId
    dst: NodeId
    edges: tuple[int, ...]
    delay: float  # ms per Gbps, sum of edge delays
    hop_count: int  # sum of edge hop counts
    bottleneck: float  # Gbps, min residual along the path

    @property
    def is_empty(self) -> bool:
        return not self.edges


def _residual(t: Topology, residual: Mapping[int, float] | None, eid: int) -> float:
    if residual is None:
        return t.edges[eid].bandwidth_gbps
    return residual[eid]


def make_path(t: Topology, src: NodeId, edges: tuple[int, ...], residual=None) -> RoutedPath:
    delay = 0.0
    hops = 0
    bottleneck = math.inf
    node = src
    for eid in edges:
        e = t.edges[eid]
        if e.src != node:
            raise ValueError(f"edge {eid} does not continue the path at {node}")
        delay += e.delay
        hops += e.hop_count
        bottleneck = min(bottleneck, _residual(t, residual, eid))
        node = e.dst
    return RoutedPath(src, node, tuple(edges), delay, hops, bottleneck)


def path_nodes(t: Topology, src: NodeId, edges: tuple[int, ...]) -> list[NodeId]:
    nodes = [src]
    for eid in edges:
        nodes.append(t.edges[eid].dst)
    return nodes


def _dijkstra(t, src, dst, usable, banned_edges, banned_nodes):
    """Least (delay, edge sequence) path from src to dst, or None."""
    heap = [(0.0, (), src)]
    settled = set()
    while heap:
        dist, seq, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        if node == dst:
            return seq
        if node != src and not node.is_surrogate:
            continue
        for eid in t.out_edges(node):
            if eid in banned_edges or not usable(eid):
                continue
            nxt = t.edges[eid].dst
            if nxt in settled or nxt in banned_nodes:
                continue
            heapq.heappush(heap, (dist + t.edges[eid].delay, seq + (eid,), nxt))
    return None


def k_shortest_paths(
    t: Topology,
    src: NodeId,
    dst: NodeId,
    k: int,
    min_bandwidth: float = 0.0,
    residual: Mapping[int, float] | None = None,
) -> list[RoutedPath]:
    """Up to ``k`` loopless paths from ``src`` to ``dst`` in nondecreasing delay.

    Edges whose residual bandwidth is below ``min_bandwidth`` are never used,
    so every returned path can carry that load.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if src == dst:
        return [RoutedPath(src, dst, (), 0.0, 0, math.inf)]

    def usable(eid: int) -> bool:
        return _residual(t, residual, eid) + BW_TOL >= min_bandwidth

    first = _dijkstra(t, src, dst, usable, frozenset(), frozenset())
    if first is None:
        return []
    found = [first]
    candidates: list[tuple[float, tuple[int, ...]]] = []
    known = {first}
    while len(found) < k:
        prev = found[-1]
        nodes = path_nodes(t, src, prev)
        for i in range(len(prev)):
            root = prev[:i]
            banned_edges = {p[i] for p in found if len(p) > i and p[:i] == root}
            spur = _dijkstra(t, nodes[i], dst, usable, banned_edges, frozenset(nodes[:i]))
            if spur is None:
                continue
            cand = root + spur
            if cand not in known:
                known.add(cand)
                heapq.heappush(candidates, (make_path(t, src, cand).delay, cand))
        if not candidates:
            break
        found.append(heapq.heappop(candidates)[1])
    return [make_path(t, src, p, residual) for p in found]


def least_delay_path(
    t: Topology,
    src: NodeId,
    dst: NodeId,
    min_bandwidth: float = 0.0,
    residual: Mapping[int, float] | None = None,
) -> RoutedPath | None:
    paths = k_shortest_paths(t, src, dst, 1, min_bandwidth, residual)
    return paths[0] if paths else None
