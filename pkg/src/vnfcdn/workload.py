"""VNF catalog, per-user service requests, and request ranking."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .topology import NodeId, Role, Topology, TopologyParseError

__all__ = [
    "VnfType",
    "ServiceRequest",
    "Workload",
    "WorkloadGenParams",
    "WorkloadError",
    "generate_workload",
    "rank_requests",
    "demand_score",
    "save_workload",
    "load_workload",
    "workload_to_dict",
    "workload_from_dict",
]


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class VnfType:
    id: int
    resource_requirement: float  # vCPU
    processing_capacity: float  # Gbps
    license_cost: float = 100.0
    max_instances: int = 3
    processing_delay: Mapping[NodeId, float] = field(default_factory=dict)  # ms per Gbps

    def __post_init__(self):
        if not self.resource_requirement > 0 or not self.processing_capacity > 0:
            raise WorkloadError(f"VNF type {self.id}: requirement and capacity must be positive")
        if self.max_instances < 1:
            raise WorkloadError(f"VNF type {self.id}: max_instances must be >= 1")
        if any(v < 0 for v in self.processing_delay.values()):
            raise WorkloadError(f"VNF type {self.id}: negative processing delay")

    def delay_on(self, server: NodeId) -> float:
        return self.processing_delay[server]


@dataclass(frozen=True)
class ServiceRequest:
    user: NodeId
    chain: tuple[int, ...]
    load: float  # Gbps
    delay_threshold: float  # ms
    content_servers: frozenset[NodeId]

    def __post_init__(self):
        object.__setattr__(self, "chain", tuple(self.chain))
        object.__setattr__(self, "content_servers", frozenset(self.content_servers))
        if self.user.role is not Role.USER:
            raise WorkloadError(f"request owner {self.user} is not an end-user")
        if not self.chain or len(set(self.chain)) != len(self.chain):
            raise WorkloadError(f"{self.user}: chain must be non-empty and duplicate-free")
        if not self.load > 0 or not self.delay_threshold > 0:
            raise WorkloadError(f"{self.user}: load and threshold must be positive")
        if not self.content_servers or any(w.role is not Role.CONTENT for w in self.content_servers):
            raise WorkloadError(f"{self.user}: content servers must be a non-empty set of content nodes")

    @property
    def head(self) -> int:
        return self.chain[0]

    @property
    def tail(self) -> int:
        return self.chain[-1]


@dataclass(frozen=True)
class Workload:
    requests: tuple[ServiceRequest, ...]
    catalog: tuple[VnfType, ...]

    def __post_init__(self):
        object.__setattr__(self, "requests", tuple(self.requests))
        object.__setattr__(self, "catalog", tuple(self.catalog))
        ids = [v.id for v in self.catalog]
        if len(set(ids)) != len(ids):
            raise WorkloadError("duplicate VNF type ids in catalog")
        users = [r.user for r in self.requests]
        if len(set(users)) != len(users):
            raise WorkloadError("more than one request per end-user")
        known = set(ids)
        for r in self.requests:
            if not set(r.chain) <= known:
                raise WorkloadError(f"{r.user}: chain references unknown VNF type")

    @cached_property
    def types(self) -> dict[int, VnfType]:
        return {v.id: v for v in self.catalog}

    def request_for(self, u: NodeId) -> ServiceRequest:
        for r in self.requests:
            if r.user == u:
                return r
        raise KeyError(u)

    def check_against(self, t: Topology) -> list[str]:
        """Cross-check against a topology; returns human-readable problems."""
        problems = []
        nodes = set(t.nodes)
        for r in self.requests:
            if r.user not in nodes:
                problems.append(f"request user {r.user} not in topology")
            for w in r.content_servers:
                if w not in nodes:
                    problems.append(f"{r.user}: content server {w} not in topology")
        for v in self.catalog:
            for s in t.surrogates:
                if s not in v.processing_delay:
                    problems.append(f"VNF {v.id}: no processing delay for {s}")
        return problems

    def restrict(self, users: Sequence[NodeId]) -> "Workload":
        keep = set(users)
        return Workload(tuple(r for r in self.requests if r.user in keep), self.catalog)


@dataclass(frozen=True)
class WorkloadGenParams:
    """Workload settings. Loads and thresholds follow the evaluation ranges;
    catalog ranges are repo defaults since the evaluation does not publish them."""

    chain_length: int = 3
    load_range_mbps: tuple[float, float] = (15.0, 50.0)
    threshold_range_ms: tuple[float, float] = (80.0, 250.0)
    replication_degree: int = 3
    n_vnf_types: int = 5
    n_chain_templates: int = 3
    resource_range: tuple[int, int] = (1, 4)
    processing_capacity_range: tuple[float, float] = (0.1, 0.3)
    license_cost: float = 100.0
    max_instances: int = 3
    processing_delay_range: tuple[float, float] = (100.0, 300.0)
    seed: int = 0

    def __post_init__(self):
        if self.chain_length < 1 or self.chain_length > self.n_vnf_types:
            raise WorkloadError("chain_length must be in [1, n_vnf_types]")
        if self.replication_degree < 1 or self.n_chain_templates < 1:
            raise WorkloadError("replication degree and template count must be >= 1")
        for name in (
            "load_range_mbps",
            "threshold_range_ms",
            "resource_range",
            "processing_capacity_range",
            "processing_delay_range",
        ):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise WorkloadError(f"{name}: lo > hi")
        if self.load_range_mbps[0] <= 0 or self.threshold_range_ms[0] <= 0:
            raise WorkloadError("loads and thresholds must be positive")


def generate_workload(params: WorkloadGenParams, t: Topology) -> Workload:
    """One request per end-user of ``t``.

    Each user's request is drawn from its own stream, so the workload for a
    topology with fewer users is a prefix of the one for more users.
    """
    contents = t.content_servers
    if params.replication_degree > len(contents):
        raise WorkloadError(
            f"replication degree {params.replication_degree} exceeds {len(contents)} content servers"
        )
    catalog_ss, template_ss, users_ss = np.random.SeedSequence(params.seed).spawn(3)

    rng = np.random.default_rng(catalog_ss)
    catalog = []
    for k in range(params.n_vnf_types):
        r = int(rng.integers(params.resource_range[0], params.resource_range[1] + 1))
        p = float(rng.uniform(*params.processing_capacity_range))
        delays = {s: float(rng.uniform(*params.processing_delay_range)) for s in t.surrogates}
        catalog.append(VnfType(k, float(r), p, params.license_cost, params.max_instances, delays))

    rng = np.random.default_rng(template_ss)
    templates = [
        tuple(int(k) for k in rng.choice(params.n_vnf_types, size=params.chain_length, replace=False))
        for _ in range(params.n_chain_templates)
    ]

    requests = []
    users = t.users
    # spawn enough streams for the largest index so prefixes stay stable
    n_streams = (max(u.index for u in users) + 1) if users else 0
    streams = users_ss.spawn(n_streams)
    for u in users:
        rng = np.random.default_rng(streams[u.index])
        chain = templates[int(rng.integers(len(templates)))]
        load = float(rng.uniform(*params.load_range_mbps)) / 1000.0
        threshold = float(rng.uniform(*params.threshold_range_ms))
        n_copies = int(rng.integers(params.replication_degree, len(contents) + 1))
        picks = rng.choice(len(contents), size=n_copies, replace=False)
        requests.append(
            ServiceRequest(u, chain, load, threshold, frozenset(contents[i] for i in picks))
        )
    return Workload(tuple(requests), tuple(catalog))


def demand_score(r: ServiceRequest, types: Mapping[int, VnfType]) -> float:
    """Aggregate demand: load times total vCPU of the chain."""
    return r.load * sum(types[k].resource_requirement for k in r.chain)


def rank_requests(w: Workload) -> list[ServiceRequest]:
    """Order requests by descending demand score, then tighter threshold, then user index."""
    types = w.types
    return sorted(w.requests, key=lambda r: (-demand_score(r, types), r.delay_threshold, r.user.index))


# -- serialization ---------------------------------------------------------


def workload_to_dict(w: Workload) -> dict:
    return {
        "units": {
            "load": "Gbps",
            "delay_threshold": "ms",
            "resource_requirement": "vCPU",
            "processing_capacity": "Gbps",
            "license_cost": "dollars per instance",
            "processing_delay": "ms per Gbps of load",
        },
        "catalog": [
            {
                "id": v.id,
                "resource_requirement": v.resource_requirement,
                "processing_capacity": v.processing_capacity,
                "license_cost": v.license_cost,
                "max_instances": v.max_instances,
                "processing_delay": {str(n): d for n, d in sorted(v.processing_delay.items())},
            }
            for v in w.catalog
        ],
        "requests": [
            {
                "user": str(r.user),
                "chain": list(r.chain),
                "load": r.load,
                "delay_threshold": r.delay_threshold,
                "content_servers": sorted(str(c) for c in r.content_servers),
            }
            for r in w.requests
        ],
    }


def _get(obj, name, where):
    if not isinstance(obj, Mapping) or name not in obj:
        raise TopologyParseError(f"{where}: missing required field {name!r}")
    return obj[name]


def workload_from_dict(doc: Mapping) -> Workload:
    catalog = []
    for i, raw in enumerate(_get(doc, "catalog", "workload")):
        where = f"catalog[{i}]"
        catalog.append(
            VnfType(
                int(_get(raw, "id", where)),
                float(_get(raw, "resource_requirement", where)),
                float(_get(raw, "processing_capacity", where)),
                float(raw.get("license_cost", 100.0)),
                int(raw.get("max_instances", 3)),
                {NodeId.parse(k): float(v) for k, v in _get(raw, "processing_delay", where).items()},
            )
        )
    requests = []
    for i, raw in enumerate(_get(doc, "requests", "workload")):
        where = f"requests[{i}]"
        requests.append(
            ServiceRequest(
                NodeId.parse(_get(raw, "user", where)),
                tuple(int(k) for k in _get(raw, "chain", where)),
                float(_get(raw, "load", where)),
                float(_get(raw, "delay_threshold", where)),
                frozenset(NodeId.parse(c) for c in _get(raw, "content_servers", where)),
            )
        )
    return Workload(tuple(requests), tuple(catalog))


def save_workload(w: Workload, path: str | Path) -> None:
    Path(path).write_text(json.dumps(workload_to_dict(w), indent=2) + "\n", encoding="utf-8")


def load_workload(path: str | Path) -> Workload:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyParseError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return workload_from_dict(doc)
