"""
Growing the audience
====================

Sweep the number of end-users on shared topology seeds and watch servers,
cost and response time move. The CSV is the hand-off point for plotting.
"""

import csv
import io
from collections import defaultdict

from vnfcdn import ScenarioConfig, rows_to_csv, sweep_users

cfg = ScenarioConfig(seeds=tuple(range(5)))
rows = sweep_users(cfg, (9, 12, 15, 18, 25))

by_users = defaultdict(list)
for r in rows:
    by_users[r.n_users].append(r)

print("users servers  total_cost  response_ms  rejected")
for n, group in sorted(by_users.items()):
    k = len(group)
    servers = sum(r.servers_used for r in group) / k
    total = sum(r.total_cost for r in group) / k
    resp = [r.avg_response_time_ms for r in group if r.avg_response_time_ms is not None]
    rej = sum(r.rejected for r in group) / k
    print(f"{n:5d} {servers:7.1f} {total:11.1f} {sum(resp) / len(resp):12.1f} {rej:9.1f}")

# timing is left out so the same seeds always give the same bytes
text = rows_to_csv(rows, include_timing=False)
print()
print(text.splitlines()[0])
print(next(csv.reader(io.StringIO(text.splitlines()[1]))))
