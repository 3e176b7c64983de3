"""Command-line entry point: instance generation, scenario runs, sweeps, gap reports.

Exit codes: 0 success, 2 bad configuration or input file, 3 infeasible or
failed generation/solve.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .cpvnf import CpvnfParams, place_all
from .exact import solve_exact
from .experiment import (
    PRESETS,
    ConfigError,
    ScenarioConfig,
    compare_gap,
    load_config,
    preset,
    rows_to_csv,
    run_instance,
    run_scenario,
    sweep_users,
    write_csv,
)
from .placement import InfeasibleSolutionError, save_solution
from .topology import GenerationError, TopologyError, generate_topology, load_topology, save_topology
from .workload import WorkloadError, generate_workload, load_workload, save_workload

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

# flag -> (section, field)
_CPVNF_FLAGS = {
    "pi": ("sir", "capacity_weight"),
    "gamma": ("sir", "instance_weight"),
    "mu": ("sir", "penalty_coeff"),
    "psi": ("sir", "damping"),
    "k_paths": (None, "k_paths"),
    "stop": (None, "stop"),
    "pi_decay": (None, "pi_decay"),
    "epsilon": (None, "epsilon"),
}


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", default="default", choices=sorted(PRESETS), help="starting configuration")
    p.add_argument("--config", type=Path, help="JSON scenario file layered over the preset")
    p.add_argument("--seeds", type=int, nargs="+", help="seed list (overrides the config)")
    p.add_argument("--surrogates", type=int, help="number of surrogate servers")
    p.add_argument("--content-servers", type=int, help="number of content servers")
    p.add_argument("--users", type=int, help="number of end-users")


def _add_cpvnf_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("CPVNF parameters")
    g.add_argument("--pi", type=float, help="capacity vs bandwidth weight in node mass")
    g.add_argument("--gamma", type=float, help="teleport boost on servers already hosting the type")
    g.add_argument("--mu", type=float, help="content-server penalty coefficient")
    g.add_argument("--psi", type=float, help="damping factor")
    g.add_argument("--k-paths", type=int, help="candidate paths per leg")
    g.add_argument("--stop", type=int, help="retries before a request is rejected")
    g.add_argument("--pi-decay", type=float, help="factor applied to pi on each retry")
    g.add_argument("--epsilon", type=float, help="guard added to the penalty denominator")


def _add_exact_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-nodes", type=int, help="exact solver node budget")
    p.add_argument("--time-limit", type=float, help="exact solver time budget in seconds")


def _config(args) -> ScenarioConfig:
    cfg = preset(args.preset)
    if args.config is not None:
        cfg = load_config(args.config, cfg)
    topo = {}
    if getattr(args, "surrogates", None) is not None:
        topo["n_surrogates"] = args.surrogates
    if getattr(args, "content_servers", None) is not None:
        topo["n_content_servers"] = args.content_servers
    if getattr(args, "users", None) is not None:
        topo["n_end_users"] = args.users
    changes = {}
    if topo:
        changes["topology"] = dataclasses.replace(cfg.topology, **topo)
    if getattr(args, "seeds", None) is not None:
        changes["seeds"] = tuple(args.seeds)
    if getattr(args, "algorithm", None) is not None:
        changes["algorithm"] = args.algorithm
    if getattr(args, "output", None) is not None:
        changes["output"] = str(args.output)
    changes["cpvnf"] = _cpvnf_params(args, cfg.cpvnf)
    budget = {}
    if getattr(args, "max_nodes", None) is not None:
        budget["max_nodes_expanded"] = args.max_nodes
    if getattr(args, "time_limit", None) is not None:
        budget["time_limit"] = args.time_limit
    if budget:
        changes["exact_budget"] = dataclasses.replace(cfg.exact_budget, **budget)
    try:
        return dataclasses.replace(cfg, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _cpvnf_params(args, base: CpvnfParams) -> CpvnfParams:
    sir, top = {}, {}
    for flag, (section, name) in _CPVNF_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            (sir if section == "sir" else top)[name] = value
    try:
        sir_params = dataclasses.replace(base.sir, **sir) if sir else base.sir
        return dataclasses.replace(base, sir=sir_params, **top)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _status(rows) -> int:
    # an exact row that serves nobody means the instance had no feasible plan
    if any(r.algorithm == "exact" and r.accepted == 0 and r.n_users > 0 for r in rows):
        print("error: exact solver found no feasible plan for at least one instance", file=sys.stderr)
        return EXIT_INFEASIBLE
    return 0


def _emit(text: str, output) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


# -- subcommands ---------------------------------------------------------------------


def cmd_gen_topology(args) -> int:
    cfg = _config(args)
    t = generate_topology(dataclasses.replace(cfg.topology, seed=args.seed))
    save_topology(t, args.out)
    print(f"wrote {args.out}: {len(t.surrogates)} surrogates, {len(t.users)} users, {len(t.edges)} edges")
    return 0


def cmd_gen_workload(args) -> int:
    cfg = _config(args)
    t = load_topology(args.topology)
    w = generate_workload(dataclasses.replace(cfg.workload, seed=args.seed), t)
    save_workload(w, args.out)
    print(f"wrote {args.out}: {len(w.requests)} requests, {len(w.catalog)} VNF types")
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    if (args.topology is None) != (args.workload is None):
        raise ConfigError("--topology and --workload must be given together")
    if args.topology is None:
        rows = run_scenario(cfg, audit=args.audit, include_timing=not args.no_timing)
        if cfg.output is None:
            _emit(rows_to_csv(rows, not args.no_timing), None)
        return _status(rows)

    t = load_topology(args.topology)
    w = load_workload(args.workload)
    problems = w.check_against(t)
    if problems:
        raise ConfigError("workload does not match topology: " + "; ".join(problems))
    seed = cfg.seeds[0]
    rows = run_instance(cfg, seed, t, w, audit=args.audit)
    if cfg.output:
        write_csv(rows, cfg.output, not args.no_timing)
    else:
        _emit(rows_to_csv(rows, not args.no_timing), None)
    if args.solution is not None:
        if cfg.algorithm == "exact":
            res = solve_exact(t, w, cfg.exact_budget)
            if res.solution is None:
                print(f"exact solver found no feasible plan ({res.status})", file=sys.stderr)
                return EXIT_INFEASIBLE
            save_solution(res.solution, args.solution)
        else:
            save_solution(place_all(t, w, cfg.cpvnf).solution, args.solution)
    return _status(rows)


def cmd_sweep(args) -> int:
    cfg = _config(args)
    rows = sweep_users(cfg, tuple(args.user_counts), nested=args.nested, include_timing=not args.no_timing)
    if cfg.output is None:
        _emit(rows_to_csv(rows, not args.no_timing), None)
    return _status(rows)


def cmd_compare(args) -> int:
    cfg = _config(args)
    report = compare_gap(cfg)
    doc = {
        "scenario_id": cfg.scenario_id,
        "ratios": {str(k): v for k, v in sorted(report.ratios.items())},
        "excluded": {str(k): v for k, v in sorted(report.excluded.items())},
        "mean_ratio": report.mean_ratio,
        "max_ratio": report.max_ratio,
    }
    _emit(json.dumps(doc, indent=2) + "\n", args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vnfcdn", description="Proactive VNF placement and chaining experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-topology", help="generate a random topology as JSON")
    _add_config_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_gen_topology)

    p = sub.add_parser("gen-workload", help="generate requests for a topology file")
    _add_config_args(p)
    p.add_argument("--topology", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_gen_workload)

    p = sub.add_parser("run", help="run a scenario and write metrics CSV")
    _add_config_args(p)
    _add_cpvnf_args(p)
    _add_exact_args(p)
    p.add_argument("--algorithm", choices=("exact", "cpvnf", "both"))
    p.add_argument("--topology", type=Path, help="use this topology file instead of generating")
    p.add_argument("--workload", type=Path, help="use this workload file instead of generating")
    p.add_argument("--solution", type=Path, help="write the placement as JSON (file inputs only)")
    p.add_argument("--output", type=Path, help="CSV path (stdout when omitted)")
    p.add_argument("--audit", action="store_true", help="re-check every solution after a JSON round trip")
    p.add_argument("--no-timing", action="store_true", help="leave runtime_ms empty for reproducible output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a range of user counts on shared seeds")
    _add_config_args(p)
    _add_cpvnf_args(p)
    _add_exact_args(p)
    p.add_argument("--algorithm", choices=("exact", "cpvnf", "both"))
    p.add_argument("--user-counts", type=int, nargs="+", default=[9, 12, 15, 18, 25])
    p.add_argument("--nested", action="store_true", help="smaller workloads are prefixes of larger ones")
    p.add_argument("--output", type=Path)
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="CPVNF cost over the proven optimum, per seed")
    _add_config_args(p)
    _add_cpvnf_args(p)
    _add_exact_args(p)
    p.add_argument("--output", type=Path, help="JSON report path (stdout when omitted)")
    p.set_defaults(func=cmd_compare, preset="tiny")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TopologyError, WorkloadError, OSError) as exc:
        if isinstance(exc, GenerationError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleSolutionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
