"""Physical CDN graph: surrogate servers, content servers and end-users.

Bandwidth capacities are stored in Mbps as they appear in topology files;
``Edge.bandwidth_gbps`` converts for placement arithmetic, which runs in Gbps.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Role",
    "NodeId",
    "Edge",
    "SurrogateAttrs",
    "Topology",
    "TopologyGenParams",
    "Violation",
    "TopologyError",
    "GenerationError",
    "TopologyParseError",
    "generate_topology",
    "validate",
    "save_topology",
    "load_topology",
    "topology_to_dict",
    "topology_from_dict",
    "restrict_users",
]

UNITS = {
    "bandwidth": "Mbps",
    "delay": "ms per Gbps of load",
    "capacity": "vCPU",
    "site_license_cost": "dollars",
    "operational_cost_per_unit": "dollars per vCPU",
    "bandwidth_cost_per_unit": "dollars per Gbps per hop",
}


class TopologyError(ValueError):
    """Base class for topology construction problems."""


class GenerationError(TopologyError):
    """Raised when random generation cannot meet the reachability invariant."""


class TopologyParseError(TopologyError):
    """Raised for malformed topology documents."""


class Role(str, Enum):
    SURROGATE = "surrogate"
    CONTENT = "content"
    USER = "user"


_PREFIX = {Role.SURROGATE: "s", Role.CONTENT: "w", Role.USER: "u"}
_ROLE_OF_PREFIX = {v: k for k, v in _PREFIX.items()}
_ROLE_ORDER = {Role.SURROGATE: 0, Role.CONTENT: 1, Role.USER: 2}


@dataclass(frozen=True)
class NodeId:
    """A node identified by its role and a per-role index (``s0``, ``w2``, ``u7``)."""

    role: Role
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise TopologyError(f"negative node index {self.index}")

    @property
    def sort_key(self) -> tuple[int, int]:
        return (_ROLE_ORDER[self.role], self.index)

    def __lt__(self, other: "NodeId") -> bool:
        return self.sort_key < other.sort_key

    def __str__(self) -> str:
        return f"{_PREFIX[self.role]}{self.index}"

    def __repr__(self) -> str:
        return f"NodeId({self})"

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        if not isinstance(text, str) or len(text) < 2 or text[0] not in _ROLE_OF_PREFIX:
            raise TopologyParseError(f"bad node id {text!r}")
        try:
            index = int(text[1:])
        except ValueError:
            raise TopologyParseError(f"bad node id {text!r}") from None
        return cls(_ROLE_OF_PREFIX[text[0]], index)

    @property
    def is_surrogate(self) -> bool:
        return self.role is Role.SURROGATE


def surrogate(i: int) -> NodeId:
    return NodeId(Role.SURROGATE, i)


def content(i: int) -> NodeId:
    return NodeId(Role.CONTENT, i)


def user(i: int) -> NodeId:
    return NodeId(Role.USER, i)


@dataclass(frozen=True)
class Edge:
    src: NodeId
    dst: NodeId
    bandwidth: float  # Mbps
    delay: float  # ms per Gbps
    hop_count: int = 1

    @property
    def bandwidth_gbps(self) -> float:
        return self.bandwidth / 1000.0

    @property
    def key(self) -> tuple[NodeId, NodeId]:
        return (self.src, self.dst)


@dataclass(frozen=True)
class SurrogateAttrs:
    capacity: float
    site_license_cost: float = 1000.0
    operational_cost_per_unit: float = 5.0
    bandwidth_cost_per_unit: float = 10.0


@dataclass(frozen=True)
class Violation:
    kind: str
    culprits: tuple = ()
    detail: str = ""


@dataclass(frozen=True, eq=False)
class Topology:
    """Immutable network graph.

    Edges are kept sorted by ``(src, dst)``; an edge's position in ``edges``
    is its edge id, which routed paths refer to.
    """

    nodes: tuple[NodeId, ...]
    edges: tuple[Edge, ...]
    surrogate_attrs: Mapping[NodeId, SurrogateAttrs]
    default_bandwidth_cost: float = 10.0
    _out: dict = field(init=False, repr=False, compare=False)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = tuple(sorted(set(self.nodes)))
        edges = tuple(sorted(self.edges, key=lambda e: (e.src.sort_key, e.dst.sort_key)))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "surrogate_attrs", dict(sorted(self.surrogate_attrs.items())))
        out: dict[NodeId, list[int]] = {n: [] for n in nodes}
        index: dict[tuple[NodeId, NodeId], int] = {}
        for eid, e in enumerate(edges):
            out.setdefault(e.src, []).append(eid)
            index[e.key] = eid
        object.__setattr__(self, "_out", {n: tuple(v) for n, v in out.items()})
        object.__setattr__(self, "_index", index)

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.edges == other.edges
            and dict(self.surrogate_attrs) == dict(other.surrogate_attrs)
            and self.default_bandwidth_cost == other.default_bandwidth_cost
        )

    __hash__ = None

    def by_role(self, role: Role) -> tuple[NodeId, ...]:
        return tuple(n for n in self.nodes if n.role is role)

    @cached_property
    def surrogates(self) -> tuple[NodeId, ...]:
        return self.by_role(Role.SURROGATE)

    @cached_property
    def content_servers(self) -> tuple[NodeId, ...]:
        return self.by_role(Role.CONTENT)

    @cached_property
    def users(self) -> tuple[NodeId, ...]:
        return self.by_role(Role.USER)

    def out_edges(self, node: NodeId) -> tuple[int, ...]:
        return self._out.get(node, ())

    def edge_id(self, src: NodeId, dst: NodeId) -> int | None:
        return self._index.get((src, dst))

    def bandwidth_cost_from(self, node: NodeId) -> float:
        """Per-Gbps-per-hop price charged to traffic sent by ``node``."""
        attrs = self.surrogate_attrs.get(node)
        if attrs is None:
            return self.default_bandwidth_cost
        return attrs.bandwidth_cost_per_unit

    def surrogate_neighbors(self, node: NodeId) -> tuple[NodeId, ...]:
        return tuple(
            self.edges[eid].dst for eid in self.out_edges(node) if self.edges[eid].dst.is_surrogate
        )


@dataclass(frozen=True)
class TopologyGenParams:
    """Random topology settings; defaults follow the 9-server evaluation set-up."""

    n_surrogates: int = 9
    n_content_servers: int = 5
    n_end_users: int = 9
    bandwidth_choices: tuple[float, ...] = (100.0, 1000.0, 10000.0)
    surrogate_out_degree: tuple[int, int] = (1, 4)
    user_degree: tuple[int, int] = (1, 2)
    content_out_degree: tuple[int, int] = (1, 3)
    capacity_range: tuple[int, int] = (16, 64)
    capacity_choices: tuple[float, ...] | None = None  # overrides capacity_range when set
    delay_range: tuple[float, float] = (100.0, 600.0)
    operational_cost_range: tuple[int, int] = (5, 10)
    site_license_cost: float = 1000.0
    bandwidth_cost: float = 10.0
    seed: int = 0
    max_attempts: int = 50

    def __post_init__(self):
        for name in ("n_surrogates", "n_content_servers", "n_end_users"):
            if getattr(self, name) < 1:
                raise TopologyError(f"{name} must be >= 1")
        if not self.bandwidth_choices or min(self.bandwidth_choices) <= 0:
            raise TopologyError("bandwidth_choices must be non-empty and positive")
        for name in (
            "surrogate_out_degree",
            "user_degree",
            "content_out_degree",
            "capacity_range",
            "delay_range",
            "operational_cost_range",
        ):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise TopologyError(f"{name}: lo > hi")
        if self.surrogate_out_degree[0] < 0 or self.delay_range[0] < 0:
            raise TopologyError("degrees and delays must be non-negative")
        if self.capacity_range[0] <= 0 or (self.capacity_choices is not None and min(self.capacity_choices) <= 0):
            raise TopologyError("capacity must be positive")


def _draw_targets(rng: np.random.Generator, pool: Sequence[NodeId], lo: int, hi: int) -> list[NodeId]:
    hi = min(hi, len(pool))
    lo = min(lo, hi)
    count = int(rng.integers(lo, hi + 1))
    picks = rng.choice(len(pool), size=count, replace=False)
    return [pool[i] for i in sorted(picks)]


def _draw_edge(rng, params: TopologyGenParams, src: NodeId, dst: NodeId) -> Edge:
    bw = float(params.bandwidth_choices[int(rng.integers(len(params.bandwidth_choices)))])
    delay = float(rng.uniform(*params.delay_range))
    return Edge(src, dst, bw, delay, 1)


def _attempt(params: TopologyGenParams, seq: np.random.SeedSequence) -> Topology:
    # independent streams per role keep smaller user counts a prefix of larger ones
    core_ss, content_ss, attrs_ss, users_ss = seq.spawn(4)
    surrogates = [surrogate(i) for i in range(params.n_surrogates)]
    contents = [content(i) for i in range(params.n_content_servers)]
    users = [user(i) for i in range(params.n_end_users)]

    edges: list[Edge] = []
    rng = np.random.default_rng(core_ss)
    for s in surrogates:
        others = [o for o in surrogates if o != s]
        for t in _draw_targets(rng, others, *params.surrogate_out_degree):
            edges.append(_draw_edge(rng, params, s, t))

    rng = np.random.default_rng(content_ss)
    for w in contents:
        for t in _draw_targets(rng, surrogates, *params.content_out_degree):
            edges.append(_draw_edge(rng, params, w, t))

    user_streams = users_ss.spawn(params.n_end_users)
    for u, ss in zip(users, user_streams):
        rng = np.random.default_rng(ss)
        for s in _draw_targets(rng, surrogates, *params.user_degree):
            edges.append(_draw_edge(rng, params, s, u))

    rng = np.random.default_rng(attrs_ss)
    attrs = {}
    for s in surrogates:
        if params.capacity_choices:
            cap = float(params.capacity_choices[int(rng.integers(len(params.capacity_choices)))])
        else:
            cap = float(rng.integers(params.capacity_range[0], params.capacity_range[1] + 1))
        attrs[s] = SurrogateAttrs(
            capacity=cap,
            site_license_cost=params.site_license_cost,
            operational_cost_per_unit=float(
                rng.integers(params.operational_cost_range[0], params.operational_cost_range[1] + 1)
            ),
            bandwidth_cost_per_unit=params.bandwidth_cost,
        )
    return Topology(tuple(surrogates + contents + users), tuple(edges), attrs, params.bandwidth_cost)


def generate_topology(params: TopologyGenParams) -> Topology:
    """Draw a random topology, redrawing edge sets until every user is reachable.

    Raises:
        GenerationError: if ``params.max_attempts`` draws all leave some end-user
            without a path from a content server.
    """
    attempts = np.random.SeedSequence(params.seed).spawn(params.max_attempts)
    for seq in attempts:
        topo = _attempt(params, seq)
        if not _unreachable_users(topo):
            return topo
    raise GenerationError(
        f"no topology with full end-user reachability after {params.max_attempts} attempts "
        f"(seed={params.seed})"
    )


def _unreachable_users(t: Topology) -> list[NodeId]:
    # paths may only transit surrogates; start from every content server at once
    seen: set[NodeId] = set()
    queue: deque[NodeId] = deque()
    for w in t.content_servers:
        for eid in t.out_edges(w):
            dst = t.edges[eid].dst
            if dst.is_surrogate and dst not in seen:
                seen.add(dst)
                queue.append(dst)
    reached_users = set()
    while queue:
        node = queue.popleft()
        for eid in t.out_edges(node):
            dst = t.edges[eid].dst
            if dst.role is Role.USER:
                reached_users.add(dst)
            elif dst.is_surrogate and dst not in seen:
                seen.add(dst)
                queue.append(dst)
    return [u for u in t.users if u not in reached_users]


def validate(t: Topology) -> list[Violation]:
    """Check structural invariants; returns one ``Violation`` per problem found."""
    out: list[Violation] = []
    nodes = set(t.nodes)
    seen_keys = set()
    for eid, e in enumerate(t.edges):
        missing = [n for n in (e.src, e.dst) if n not in nodes]
        if missing:
            out.append(Violation("dangling-endpoint", (eid, *missing), f"edge {e.src}->{e.dst}"))
        if e.key in seen_keys:
            out.append(Violation("duplicate-edge", (eid,), f"edge {e.src}->{e.dst}"))
        seen_keys.add(e.key)
        if e.src == e.dst:
            out.append(Violation("self-loop", (eid,), str(e.src)))
        if not e.bandwidth > 0:
            out.append(Violation("edge-bandwidth", (eid,), f"bandwidth={e.bandwidth}"))
        if not e.delay >= 0:
            out.append(Violation("edge-delay", (eid,), f"delay={e.delay}"))
        if e.hop_count < 1:
            out.append(Violation("edge-hops", (eid,), f"hop_count={e.hop_count}"))
    for n in t.surrogates:
        a = t.surrogate_attrs.get(n)
        if a is None:
            out.append(Violation("missing-attrs", (n,)))
            continue
        if not a.capacity > 0 or min(
            a.site_license_cost, a.operational_cost_per_unit, a.bandwidth_cost_per_unit
        ) < 0:
            out.append(Violation("bad-attrs", (n,), repr(a)))
    for n in t.surrogate_attrs:
        if not n.is_surrogate or n not in nodes:
            out.append(Violation("stray-attrs", (n,)))
    for u in _unreachable_users(t):
        out.append(Violation("unreachable-user", (u,)))
    return out


def restrict_users(t: Topology, n_users: int) -> Topology:
    """Drop end-users with index >= ``n_users`` together with their edges."""
    keep = {n for n in t.nodes if n.role is not Role.USER or n.index < n_users}
    edges = tuple(e for e in t.edges if e.src in keep and e.dst in keep)
    return Topology(tuple(keep), edges, t.surrogate_attrs, t.default_bandwidth_cost)


# -- serialization ---------------------------------------------------------


def topology_to_dict(t: Topology) -> dict:
    return {
        "units": UNITS,
        "default_bandwidth_cost": t.default_bandwidth_cost,
        "nodes": [str(n) for n in t.nodes],
        "edges": [
            {
                "src": str(e.src),
                "dst": str(e.dst),
                "bandwidth": e.bandwidth,
                "delay": e.delay,
                "hop_count": e.hop_count,
            }
            for e in t.edges
        ],
        "surrogate_attrs": {
            str(n): {
                "capacity": a.capacity,
                "site_license_cost": a.site_license_cost,
                "operational_cost_per_unit": a.operational_cost_per_unit,
                "bandwidth_cost_per_unit": a.bandwidth_cost_per_unit,
            }
            for n, a in t.surrogate_attrs.items()
        },
    }


def _require(obj: Mapping, name: str, where: str):
    if not isinstance(obj, Mapping) or name not in obj:
        raise TopologyParseError(f"{where}: missing required field {name!r}")
    return obj[name]


def _number(value, name: str, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TopologyParseError(f"{where}: field {name!r} must be a number, got {value!r}")
    return float(value)


def topology_from_dict(doc: Mapping, check: bool = True) -> Topology:
    """Build a topology from its JSON document form.

    Raises:
        TopologyParseError: for missing or mistyped fields, naming the field.
        TopologyError: when ``check`` is set and the result violates invariants.
    """
    nodes = [NodeId.parse(s) for s in _require(doc, "nodes", "topology")]
    edges = []
    for i, raw in enumerate(_require(doc, "edges", "topology")):
        where = f"edges[{i}]"
        edges.append(
            Edge(
                NodeId.parse(_require(raw, "src", where)),
                NodeId.parse(_require(raw, "dst", where)),
                _number(_require(raw, "bandwidth", where), "bandwidth", where),
                _number(_require(raw, "delay", where), "delay", where),
                int(_number(raw.get("hop_count", 1), "hop_count", where)),
            )
        )
    attrs = {}
    default_b = _number(doc.get("default_bandwidth_cost", 10.0), "default_bandwidth_cost", "topology")
    for key, raw in _require(doc, "surrogate_attrs", "topology").items():
        where = f"surrogate_attrs[{key}]"
        attrs[NodeId.parse(key)] = SurrogateAttrs(
            capacity=_number(_require(raw, "capacity", where), "capacity", where),
            site_license_cost=_number(raw.get("site_license_cost", 1000.0), "site_license_cost", where),
            operational_cost_per_unit=_number(
                raw.get("operational_cost_per_unit", 5.0), "operational_cost_per_unit", where
            ),
            bandwidth_cost_per_unit=_number(
                raw.get("bandwidth_cost_per_unit", default_b), "bandwidth_cost_per_unit", where
            ),
        )
    topo = Topology(tuple(nodes), tuple(edges), attrs, default_b)
    if check:
        problems = validate(topo)
        if problems:
            summary = "; ".join(f"{v.kind} {[str(c) for c in v.culprits]}" for v in problems)
            raise TopologyError(f"invalid topology: {summary}")
    return topo


def save_topology(t: Topology, path: str | Path) -> None:
    Path(path).write_text(json.dumps(topology_to_dict(t), indent=2) + "\n", encoding="utf-8")


def load_topology(path: str | Path) -> Topology:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyParseError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return topology_from_dict(doc)


def out_degrees(edges: Iterable[Edge]) -> dict[NodeId, int]:
    deg: dict[NodeId, int] = {}
    for e in edges:
        deg[e.src] = deg.get(e.src, 0) + 1
    return deg
