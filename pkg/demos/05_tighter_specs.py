"""
Tighter service specifications
==============================

Stricter delay thresholds, heavier VNFs and smaller servers: the same seeds
need more servers, and some requests no longer fit at all.
"""

from vnfcdn import ScenarioConfig, preset, run_scenario

seeds = tuple(range(10))
default = run_scenario(ScenarioConfig(seeds=seeds))
tight = run_scenario(preset("tight", seeds=seeds))

print("seed  servers(default)  servers(tight)  rejected(tight)")
more = 0
for d, g in zip(default, tight):
    print(f"{d.seed:4d} {d.servers_used:17d} {g.servers_used:15d} {g.rejected:16d}")
    more += g.servers_used >= d.servers_used
print(f"tight used at least as many servers on {more} of {len(seeds)} seeds")
