"""Seeded scenario runs, user-count sweeps, and heuristic-vs-optimum gaps.

Every metrics row comes from a solution that has passed the constraint
checker. CSV output has a fixed column order and is written atomically.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .cpvnf import CpvnfParams, place_all
from .exact import SearchBudget, solve_exact
from .placement import (
    PlacementSolution,
    check_feasibility,
    compute_metrics,
    compute_residual,
    solution_from_dict,
    solution_to_dict,
)
from .sir import SirParams
from .topology import (
    GenerationError,
    Topology,
    TopologyGenParams,
    generate_topology,
    restrict_users,
)
from .workload import Workload, WorkloadGenParams, generate_workload

__all__ = [
    "ConfigError",
    "ExactGuard",
    "ScenarioConfig",
    "MetricsRow",
    "GapReport",
    "COLUMNS",
    "PRESETS",
    "preset",
    "build_instance",
    "run_scenario",
    "sweep_users",
    "compare_gap",
    "instance_gap",
    "run_instance",
    "rows_to_csv",
    "write_csv",
    "config_from_dict",
    "config_to_dict",
    "load_config",
]

ALGORITHMS = ("exact", "cpvnf", "both")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExactGuard:
    max_surrogates: int = 5
    max_users: int = 4
    max_chain: int = 3
    max_instances: int = 2

    def problems(self, t: Topology, w: Workload) -> list[str]:
        out = []
        if len(t.surrogates) > self.max_surrogates:
            out.append(f"{len(t.surrogates)} surrogates > {self.max_surrogates}")
        if len(w.requests) > self.max_users:
            out.append(f"{len(w.requests)} users > {self.max_users}")
        longest = max((len(r.chain) for r in w.requests), default=0)
        if longest > self.max_chain:
            out.append(f"chain length {longest} > {self.max_chain}")
        most = max((v.max_instances for v in w.catalog), default=0)
        if most > self.max_instances:
            out.append(f"{most} instances per type > {self.max_instances}")
        return out


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str = "default"
    topology: TopologyGenParams = field(default_factory=TopologyGenParams)
    workload: WorkloadGenParams = field(default_factory=WorkloadGenParams)
    algorithm: str = "cpvnf"
    cpvnf: CpvnfParams = field(default_factory=CpvnfParams)
    exact_budget: SearchBudget = field(default_factory=SearchBudget)
    exact_guard: ExactGuard = field(default_factory=ExactGuard)
    seeds: tuple[int, ...] = (0,)
    output: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ConfigError("seed list must not be empty")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")


COLUMNS = (
    "scenario_id",
    "seed",
    "algorithm",
    "n_users",
    "accepted",
    "rejected",
    "servers_used",
    "content_servers_used",
    "vnf_license",
    "site_license",
    "operational_cost",
    "communication_cost",
    "total_cost",
    "avg_response_time_ms",
    "retries_total",
    "runtime_ms",
    "proven_optimal",
)


@dataclass(frozen=True)
class MetricsRow:
    scenario_id: str
    seed: int
    algorithm: str
    n_users: int
    accepted: int
    rejected: int
    servers_used: int
    content_servers_used: int
    vnf_license: float
    site_license: float
    operational_cost: float
    communication_cost: float
    total_cost: float
    avg_response_time_ms: float | None
    retries_total: int
    runtime_ms: float
    proven_optimal: bool | None = None

    def as_list(self, include_timing: bool = True) -> list:
        out = []
        for name in COLUMNS:
            value = getattr(self, name)
            if name == "runtime_ms" and not include_timing:
                value = None
            out.append("" if value is None else value)
        return out


@dataclass
class GapReport:
    ratios: dict[int, float]
    excluded: dict[int, str]
    exact_totals: dict[int, float] = field(default_factory=dict)
    cpvnf_totals: dict[int, float] = field(default_factory=dict)

    @property
    def mean_ratio(self) -> float | None:
        return sum(self.ratios.values()) / len(self.ratios) if self.ratios else None

    @property
    def max_ratio(self) -> float | None:
        return max(self.ratios.values()) if self.ratios else None


# -- presets ----------------------------------------------------------------------


def _tight() -> ScenarioConfig:
    return ScenarioConfig(
        scenario_id="tight",
        topology=TopologyGenParams(capacity_choices=(8.0, 16.0)),
        workload=WorkloadGenParams(resource_range=(4, 8), threshold_range_ms=(40.0, 90.0)),
    )


def _tiny() -> ScenarioConfig:
    return ScenarioConfig(
        scenario_id="tiny",
        topology=TopologyGenParams(n_surrogates=4, n_content_servers=3, n_end_users=3),
        workload=WorkloadGenParams(chain_length=2, max_instances=2),
        algorithm="both",
    )


PRESETS = {
    "default": ScenarioConfig,
    "tight": _tight,
    "tiny": _tiny,
}


def preset(name: str, **overrides) -> ScenarioConfig:
    try:
        cfg = PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


# -- running ------------------------------------------------------------------------


def build_instance(cfg: ScenarioConfig, seed: int, n_users: int | None = None) -> tuple[Topology, Workload]:
    tp = dataclasses.replace(cfg.topology, seed=seed)
    if n_users is not None:
        tp = dataclasses.replace(tp, n_end_users=n_users)
    try:
        t = generate_topology(tp)
    except GenerationError as exc:
        raise GenerationError(f"scenario {cfg.scenario_id} seed {seed}: {exc}") from exc
    w = generate_workload(dataclasses.replace(cfg.workload, seed=seed), t)
    return t, w


def _audit(solution: PlacementSolution, t: Topology, w: Workload) -> None:
    reloaded = solution_from_dict(json.loads(json.dumps(solution_to_dict(solution))), w, t)
    problems = check_feasibility(reloaded, t, w)
    if problems:
        raise RuntimeError(f"solution failed the round-trip audit: {problems}")


def _row(cfg, seed, algorithm, t, w, solution, runtime_s, retries, proven) -> MetricsRow:
    m = compute_metrics(solution, t, w, runtime_s)
    return MetricsRow(
        scenario_id=cfg.scenario_id,
        seed=seed,
        algorithm=algorithm,
        n_users=len(w.requests),
        accepted=m.accepted,
        rejected=m.rejected,
        servers_used=m.servers_used,
        content_servers_used=m.content_servers_used,
        vnf_license=m.vnf_license,
        site_license=m.site_license,
        operational_cost=m.operational_cost,
        communication_cost=m.communication_cost,
        total_cost=m.total_cost,
        avg_response_time_ms=m.avg_response_time,
        retries_total=retries,
        runtime_ms=runtime_s * 1000.0,
        proven_optimal=proven,
    )


def run_instance(cfg: ScenarioConfig, seed: int, t: Topology, w: Workload, audit: bool = False) -> list[MetricsRow]:
    """Rows for one generated instance, one per algorithm in ``cfg``."""
    rows = []
    algos = ("cpvnf", "exact") if cfg.algorithm == "both" else (cfg.algorithm,)
    for algo in algos:
        start = time.perf_counter()
        if algo == "cpvnf":
            res = place_all(t, w, cfg.cpvnf)
            elapsed = time.perf_counter() - start
            solution, retries, proven = res.solution, res.retries_total, None
        else:
            problems = cfg.exact_guard.problems(t, w)
            if problems:
                raise ConfigError(
                    f"scenario {cfg.scenario_id} seed {seed}: exact solver refused by size guard: "
                    + "; ".join(problems)
                )
            res = solve_exact(t, w, cfg.exact_budget)
            elapsed = time.perf_counter() - start
            retries, proven = 0, res.proven_optimal
            if res.solution is None:
                # no plan serves everyone: report it as all rejected
                solution = PlacementSolution(rejected={r.user for r in w.requests})
                solution.residual = compute_residual(t, w, (), ())
            else:
                solution = res.solution
        if audit:
            _audit(solution, t, w)
        rows.append(_row(cfg, seed, algo, t, w, solution, elapsed, retries, proven))
    return rows


def run_scenario(cfg: ScenarioConfig, audit: bool = False, include_timing: bool = True) -> list[MetricsRow]:
    """One row per (seed, algorithm); writes CSV to ``cfg.output`` when set."""
    rows = []
    for seed in cfg.seeds:
        t, w = build_instance(cfg, seed)
        rows.extend(run_instance(cfg, seed, t, w, audit))
    if cfg.output:
        write_csv(rows, cfg.output, include_timing)
    return rows


def sweep_users(
    cfg: ScenarioConfig,
    user_counts: Sequence[int] = (9, 12, 15, 18, 25),
    nested: bool = False,
    output: str | Path | None = None,
    include_timing: bool = True,
) -> list[MetricsRow]:
    """Run every user count with the same topology seed.

    In nested mode the largest instance is generated once and smaller ones
    are its restrictions to the first users, so each workload contains the
    previous one.
    """
    if not user_counts:
        raise ConfigError("user_counts must not be empty")
    rows = []
    for seed in cfg.seeds:
        if nested:
            t_big, w_big = build_instance(cfg, seed, max(user_counts))
        for count in user_counts:
            if nested:
                t = restrict_users(t_big, count)
                w = w_big.restrict(t.users)
            else:
                t, w = build_instance(cfg, seed, count)
            rows.extend(run_instance(cfg, seed, t, w))
    target = output if output is not None else cfg.output
    if target:
        write_csv(rows, target, include_timing)
    return rows


def instance_gap(
    t: Topology,
    w: Workload,
    params: CpvnfParams | None = None,
    budget: SearchBudget | None = None,
) -> tuple[float | None, float | None, float | None, str]:
    """(ratio, cpvnf total, exact total, reason) for one instance.

    The ratio is None when CPVNF rejects a request or the optimum is not
    proven; ``reason`` then says why.
    """
    heur = place_all(t, w, params)
    if heur.solution.rejected:
        return None, None, None, f"cpvnf rejected {len(heur.solution.rejected)} request(s)"
    exact = solve_exact(t, w, budget)
    if exact.status != "optimal":
        return None, None, None, f"exact status {exact.status}"
    h_total = compute_metrics(heur.solution, t, w).total_cost
    e_total = exact.cost.total
    return h_total / e_total, h_total, e_total, ""


def compare_gap(cfg: ScenarioConfig) -> GapReport:
    """Per-seed ratio of CPVNF cost to the proven optimum.

    Seeds where CPVNF rejects a request, or where the optimum is not proven,
    are excluded and listed with the reason.
    """
    report = GapReport({}, {})
    for seed in cfg.seeds:
        t, w = build_instance(cfg, seed)
        problems = cfg.exact_guard.problems(t, w)
        if problems:
            raise ConfigError(f"seed {seed}: instance exceeds exact size guard: {'; '.join(problems)}")
        ratio, h_total, e_total, reason = instance_gap(t, w, cfg.cpvnf, cfg.exact_budget)
        if ratio is None:
            report.excluded[seed] = reason
            continue
        report.cpvnf_totals[seed] = h_total
        report.exact_totals[seed] = e_total
        report.ratios[seed] = ratio
    return report


# -- CSV ---------------------------------------------------------------------------


def rows_to_csv(rows: Iterable[MetricsRow], include_timing: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(COLUMNS)
    for r in rows:
        writer.writerow(r.as_list(include_timing))
    return buf.getvalue()


def write_csv(rows: Iterable[MetricsRow], path: str | Path, include_timing: bool = True) -> None:
    path = Path(path)
    text = rows_to_csv(rows, include_timing)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- config files --------------------------------------------------------------------


def _tuples(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def _make(cls, raw: dict | None, where: str):
    raw = raw or {}
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    try:
        return cls(**_tuples(raw))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(doc: dict, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Build a config from its JSON form; omitted sections keep ``base`` values."""
    base = base or ScenarioConfig()
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"config: unknown section(s) {sorted(unknown)}")

    def merged(section, current):
        raw = doc.get(section)
        if raw is None:
            return current
        return _make(type(current), {**dataclasses.asdict(current), **raw}, section)

    cp_raw = dict(doc.get("cpvnf") or {})
    sir_raw = cp_raw.pop("sir", None)
    sir = base.cpvnf.sir if sir_raw is None else _make(SirParams, {**dataclasses.asdict(base.cpvnf.sir), **sir_raw}, "cpvnf.sir")
    cp_fields = {k: v for k, v in dataclasses.asdict(base.cpvnf).items() if k != "sir"}
    cpvnf = _make(CpvnfParams, {**cp_fields, **cp_raw, "sir": sir}, "cpvnf")
    try:
        return ScenarioConfig(
            scenario_id=str(doc.get("scenario_id", base.scenario_id)),
            topology=merged("topology", base.topology),
            workload=merged("workload", base.workload),
            algorithm=doc.get("algorithm", base.algorithm),
            cpvnf=cpvnf,
            exact_budget=merged("exact_budget", base.exact_budget),
            exact_guard=merged("exact_guard", base.exact_guard),
            seeds=tuple(doc.get("seeds", base.seeds)),
            output=doc.get("output", base.output),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return json.loads(json.dumps(dataclasses.asdict(cfg)))


def load_config(path: str | Path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(doc, base)
