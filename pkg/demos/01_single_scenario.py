"""
One placement at full scale
===========================

Generate a 9-surrogate network with 25 end-users, place every request with
CPVNF, and read the bill.
"""

from vnfcdn import ScenarioConfig, build_instance, check_feasibility, compute_cost, compute_metrics, place_all

t, w = build_instance(ScenarioConfig(), seed=0, n_users=25)
print(f"{len(t.surrogates)} surrogates, {len(t.content_servers)} content servers, {len(w.requests)} requests")

res = place_all(t, w)
sol = res.solution

# the checker is independent of the heuristic; an empty list means no constraint is broken
print("violations:", check_feasibility(sol, t, w))

cost = compute_cost(sol, t, w)
print(f"VNF licenses  {cost.vnf_license:9.2f}")
print(f"site licenses {cost.site_license:9.2f}")
print(f"server usage  {cost.operational:9.2f}")
print(f"bandwidth     {cost.communication:9.2f}")
print(f"total         {cost.total:9.2f}")

m = compute_metrics(sol, t, w)
print(f"{m.accepted} accepted, {m.rejected} rejected on {m.servers_used} servers")
print(f"mean response time {m.avg_response_time:.1f} ms")

# a rejected request ran out of retries; the reason is kept on the outcome
for o in res.outcomes:
    if not o.accepted:
        print(f"  {o.user}: {o.reason}")
