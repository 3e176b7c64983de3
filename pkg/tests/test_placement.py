import dataclasses
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import manual_solution, node, request, topo, vnf
from vnfcdn.cpvnf import place_all
from vnfcdn.placement import (
    ChainMapping,
    InfeasibleSolutionError,
    InstanceSlot,
    PlacementSolution,
    StructuralError,
    bandwidth_cost,
    check_feasibility,
    compute_cost,
    compute_metrics,
    compute_residual,
    load_solution,
    save_solution,
    service_delay,
    solution_from_dict,
    solution_to_dict,
)
from vnfcdn.topology import Edge, SurrogateAttrs, Topology, TopologyGenParams, generate_topology
from vnfcdn.workload import Workload, WorkloadGenParams, generate_workload


def kinds(violations):
    return [v.kind for v in violations]


# -- bandwidth and delay arithmetic ----------------------------------------------------


def test_bandwidth_cost_examples():
    assert bandwidth_cost(0.015, 2, 10.0) == 0.30
    assert bandwidth_cost(0.5, 0, 10.0) == 0.0
    assert bandwidth_cost(1.0, 1, 10.0) == 10.0


def one_vnf_fixture(d1=400.0, d2=300.0, p=150.0, load=0.05):
    t = topo([("w0", "s0", 1000, d1), ("s0", "u0", 1000, d2)])
    w = Workload((request("u0", (0,), load, 1000.0),), (vnf(0, t, delay=p),))
    return t, w


def test_service_delay_single_vnf():
    t, w = one_vnf_fixture()
    s = manual_solution(t, w, {node("u0"): ("w0", [(0, "s0", 0)])})
    assert service_delay(s.mappings[node("u0")], t, w.catalog) == pytest.approx(0.05 * (400 + 300 + 150), rel=1e-15)


def test_service_delay_three_vnf_chain():
    t = topo(
        [
            ("w0", "s0", 1000, 400),
            ("s0", "s1", 1000, 300),
            ("s1", "s2", 1000, 300),
            ("s2", "u0", 1000, 400),
        ]
    )
    w = Workload(
        (request("u0", (0, 1, 2), 0.05, 1000.0),),
        tuple(vnf(k, t, delay=200.0) for k in range(3)),
    )
    s = manual_solution(t, w, {node("u0"): ("w0", [(0, "s0", 0), (1, "s1", 0), (2, "s2", 0)])})
    assert service_delay(s.mappings[node("u0")], t, w.types) == pytest.approx(100.0, rel=1e-12)


def test_service_delay_zero_everywhere():
    t, w = one_vnf_fixture(0.0, 0.0, 0.0)
    s = manual_solution(t, w, {node("u0"): ("w0", [(0, "s0", 0)])})
    assert service_delay(s.mappings[node("u0")], t, w) == 0.0


def test_service_delay_path_count_checked():
    t, w = one_vnf_fixture()
    r = w.requests[0]
    with pytest.raises(StructuralError):
        service_delay(ChainMapping(r, node("w0"), ((0, node("s0"), 0),), ((0,),)), t, w)


# -- cost -------------------------------------------------------------------------


def single_slot_fixture():
    # co-located links: zero hops, so no communication is charged
    s0, w0, u0 = node("s0"), node("w0"), node("u0")
    edges = (Edge(w0, s0, 1000.0, 1.0, 0), Edge(s0, u0, 1000.0, 1.0, 0))
    t = Topology((s0, w0, u0), edges, {s0: SurrogateAttrs(16.0, 1000.0, 5.0, 10.0)})
    w = Workload((request("u0", (0,), 0.05, 100.0),), (vnf(0, t, r=4, alpha=100),))
    return t, w, manual_solution(t, w, {u0: ("w0", [(0, "s0", 0)])})


def test_single_slot_totals_1120():
    t, w, s = single_slot_fixture()
    c = compute_cost(s, t, w)
    assert (c.vnf_license, c.site_license, c.operational, c.communication) == (100.0, 1000.0, 20.0, 0.0)
    assert c.total == 1120.0
    assert compute_cost(s, t, w) == c


def test_empty_solution_costs_nothing():
    t, w = one_vnf_fixture()
    s = PlacementSolution(rejected={node("u0")})
    c = compute_cost(s, t, w)
    assert c.total == 0.0 and c.vnf_license == c.site_license == c.operational == c.communication == 0.0
    m = compute_metrics(s, t, w)
    assert m.avg_response_time is None
    assert (m.accepted, m.rejected, m.servers_used) == (0, 1, 0)


def test_communication_charged_per_sender():
    t = topo(
        [("w0", "s0", 1000, 1), ("s0", "s1", 1000, 1), ("s1", "u0", 1000, 1)],
        bw_cost=10.0,
    )
    t = Topology(
        t.nodes,
        t.edges,
        {node("s0"): SurrogateAttrs(16, 1000, 5, 20.0), node("s1"): SurrogateAttrs(16, 1000, 5, 30.0)},
        10.0,
    )
    w = Workload((request("u0", (0,), 0.1, 1000.0),), (vnf(0, t),))
    s = manual_solution(t, w, {node("u0"): ("w0", [(0, "s0", 0)])})
    # w0->s0 at the default price, then s0->s1->u0 (2 hops) at s0's price
    assert compute_cost(s, t, w).communication == pytest.approx(0.1 * 1 * 10 + 0.1 * 2 * 20, rel=1e-15)


def test_cost_refuses_infeasible():
    t, w = one_vnf_fixture()
    with pytest.raises(InfeasibleSolutionError, match="unaccounted-request"):
        compute_cost(PlacementSolution(), t, w)


def test_metrics_average_of_three():
    t = topo(
        [
            ("w0", "s0", 1000, 0),
            ("s0", "u0", 1000, 800),
            ("s0", "u1", 1000, 1000),
            ("s0", "u2", 1000, 1200),
        ]
    )
    reqs = tuple(request(f"u{i}", (0,), 0.1, 500.0) for i in range(3))
    w = Workload(reqs, (vnf(0, t, p=1.0),))
    s = manual_solution(t, w, {node(f"u{i}"): ("w0", [(0, "s0", 0)]) for i in range(3)})
    delays = sorted(service_delay(m, t, w) for m in s.mappings.values())
    assert delays == pytest.approx([80.0, 100.0, 120.0], rel=1e-12)
    m = compute_metrics(s, t, w)
    assert m.avg_response_time == pytest.approx(100.0, rel=1e-12)
    assert m.accepted == 3 and m.servers_used == 1


def test_metrics_single_request_average():
    t, w = one_vnf_fixture(d1=1000.0, d2=600.0, p=400.0, load=0.05)
    s = manual_solution(t, w, {node("u0"): ("w0", [(0, "s0", 0)])})
    assert compute_metrics(s, t, w).avg_response_time == pytest.approx(100.0, rel=1e-12)


# -- checker -------------------------------------------------------------------------


def two_user_fixture():
    t = topo(
        [
            ("w0", "s0", 1000, 100),
            ("w1", "s1", 1000, 100),
            ("s0", "s1", 1000, 100),
            ("s1", "s0", 1000, 100),
            ("s0", "u0", 1000, 100),
            ("s1", "u1", 1000, 100),
        ],
        capacity=8.0,
    )
    w = Workload(
        (
            request("u0", (0, 1), 0.05, 200.0, ("w0",)),
            request("u1", (0, 1), 0.05, 200.0, ("w0", "w1")),
        ),
        (vnf(0, t, r=2, p=0.12, delay=100), vnf(1, t, r=2, p=0.12, delay=100)),
    )
    plan = {
        node("u0"): ("w0", [(0, "s0", 0), (1, "s0", 0)]),
        node("u1"): ("w1", [(0, "s1", 1), (1, "s1", 1)]),
    }
    return t, w, plan


def test_checker_accepts_feasible_fixture():
    t, w, plan = two_user_fixture()
    assert check_feasibility(manual_solution(t, w, plan), t, w) == []


def test_content_selection_violation():
    t, w, plan = two_user_fixture()
    plan[node("u0")] = ("w1", plan[node("u0")][1])
    # w1 has no route into s0 other than via s1, which still works, so only selection is wrong
    assert kinds(check_feasibility(manual_solution(t, w, plan), t, w)) == ["content-selection"]


def test_instance_capacity_violation_from_recomputed_loads():
    t, w, plan = two_user_fixture()
    s = manual_solution(t, w, plan)
    # a hand-edited load that disagrees with the mappings is bookkeeping, not overload
    s.slots[(0, node("s0"), 0)] = InstanceSlot(0, node("s0"), 0, 0.12 + 1e-6)
    found = check_feasibility(s, t, w)
    assert kinds(found) == ["slot-bookkeeping"]

    heavy = Workload(
        (dataclasses.replace(w.requests[0], load=0.12 + 1e-6), w.requests[1]), w.catalog
    )
    s = manual_solution(t, heavy, plan)
    recomputed = {}
    for m in s.mappings.values():
        for k, n, j in m.hops:
            recomputed[(k, n, j)] = recomputed.get((k, n, j), 0.0) + m.request.load
    over = [key for key, load in recomputed.items() if load > heavy.types[key[0]].processing_capacity]
    found = check_feasibility(s, t, heavy)
    assert sorted(v.culprits[0] for v in found if v.kind == "instance-capacity") == sorted(over)
    assert len(over) == 2  # both VNFs of u0's chain
    assert kinds(found) == ["instance-capacity", "instance-capacity"]


def test_server_capacity_and_bandwidth_violations():
    t, w, plan = two_user_fixture()
    small = Topology(t.nodes, t.edges, {n: dataclasses.replace(a, capacity=3.0) for n, a in t.surrogate_attrs.items()})
    assert set(kinds(check_feasibility(manual_solution(small, w, plan), small, w))) == {"server-capacity"}

    thin = Topology(
        t.nodes,
        tuple(dataclasses.replace(e, bandwidth=40.0) if str(e.dst) == "u0" else e for e in t.edges),
        t.surrogate_attrs,
    )
    assert kinds(check_feasibility(manual_solution(thin, w, plan), thin, w)) == ["edge-bandwidth"]


def test_delay_violation():
    t, w, plan = two_user_fixture()
    tight = Workload((dataclasses.replace(w.requests[0], delay_threshold=10.0), w.requests[1]), w.catalog)
    found = check_feasibility(manual_solution(t, tight, plan), t, tight)
    assert kinds(found) == ["delay"]


def test_structural_violations():
    t, w, plan = two_user_fixture()
    s = manual_solution(t, w, plan)
    u0 = node("u0")
    m = s.mappings[u0]

    broken = dataclasses.replace(s, mappings={**s.mappings, u0: dataclasses.replace(m, routed_paths=((0,),) * 3)})
    assert "routing" in kinds(check_feasibility(broken, t, w))

    dup = dataclasses.replace(s, rejected={u0})
    assert "double-accounting" in kinds(check_feasibility(dup, t, w))

    slots = dict(s.slots)
    slots[(0, node("s1"), 5)] = InstanceSlot(0, node("s1"), 5, 0.0)
    bad_index = dataclasses.replace(s, slots=slots, residual=None)
    assert "instance-index" in kinds(check_feasibility(bad_index, t, w))

    # same (type, index) on two servers
    clash = dict(s.slots)
    clash[(0, node("s1"), 0)] = InstanceSlot(0, node("s1"), 0, 0.0)
    found = kinds(check_feasibility(dataclasses.replace(s, slots=clash, residual=None), t, w))
    assert "instance-uniqueness" in found

    gone = dict(s.slots)
    del gone[(1, node("s0"), 0)]
    assert "instance-missing" in kinds(check_feasibility(dataclasses.replace(s, slots=gone, residual=None), t, w))

    drift = dataclasses.replace(s, residual=compute_residual(t, w, (), ()))
    assert kinds(check_feasibility(drift, t, w)) == ["residual-drift"]


# -- properties over heuristic output -------------------------------------------------------


@pytest.fixture(scope="module")
def heuristic_solutions():
    out = []
    for seed in range(6):
        t = generate_topology(TopologyGenParams(n_end_users=12, seed=seed))
        w = generate_workload(WorkloadGenParams(seed=seed), t)
        out.append((t, w, place_all(t, w).solution))
    return out


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 5), st.randoms(use_true_random=False))
def test_cost_invariant_under_reordering(heuristic_solutions, idx, rnd):
    t, w, s = heuristic_solutions[idx]
    slots = list(s.slots.items())
    maps = list(s.mappings.items())
    rnd.shuffle(slots)
    rnd.shuffle(maps)
    shuffled = PlacementSolution(dict(slots), dict(maps), set(s.rejected), s.residual)
    assert compute_cost(shuffled, t, w) == compute_cost(s, t, w)


def test_metrics_total_is_component_sum(heuristic_solutions):
    for t, w, s in heuristic_solutions:
        c = compute_cost(s, t, w)
        m = compute_metrics(s, t, w)
        assert m.total_cost == c.total
        assert m.total_cost == m.operational_cost + m.communication_cost
        assert m.operational_cost == c.vnf_license + c.site_license + c.operational


def test_solution_json_round_trip(tmp_path, heuristic_solutions):
    for i, (t, w, s) in enumerate(heuristic_solutions):
        path = tmp_path / f"s{i}.json"
        save_solution(s, path)
        back = load_solution(path, w, t)
        assert back.slots == s.slots and back.mappings == s.mappings and back.rejected == s.rejected
        assert check_feasibility(back, t, w) == []
        assert json.loads(path.read_text()) == solution_to_dict(s)


def test_random_corruption_is_caught(heuristic_solutions):
    rng = random.Random(7)
    for t, w, s in heuristic_solutions:
        doc = solution_to_dict(s)
        if not doc["mappings"]:
            continue
        m = rng.choice(doc["mappings"])
        m["routed_paths"][0] = m["routed_paths"][0][:-1] or [len(t.edges) - 1]
        assert check_feasibility(solution_from_dict(doc, w, t), t, w) != []
