"""
Ranking surrogates
==================

The server importance rank (SIR) is a personalized PageRank over the
surrogate graph. Servers already running a VNF type get a larger teleport
share, which pulls later copies of that type towards them.
"""

from vnfcdn.sir import ResidualState, SirParams, initial_sir, personalized_sir
from vnfcdn.topology import Edge, NodeId, SurrogateAttrs, Topology

s = [NodeId.parse(f"s{i}") for i in range(4)]
w0, u0 = NodeId.parse("w0"), NodeId.parse("u0")
edges = (
    Edge(w0, s[0], 1000.0, 2.0),
    Edge(s[0], s[1], 1000.0, 1.0),
    Edge(s[0], s[2], 1000.0, 1.0),
    Edge(s[1], s[2], 1000.0, 1.0),
    Edge(s[2], s[0], 1000.0, 1.0),
    Edge(s[2], s[3], 100.0, 1.0),
    Edge(s[3], u0, 1000.0, 1.0),
    Edge(s[2], u0, 1000.0, 1.0),
)
t = Topology((*s, w0, u0), edges, {n: SurrogateAttrs(c) for n, c in zip(s, (16.0, 32.0, 16.0, 8.0))})

state = ResidualState.fresh(t)
print("starting point (capacity x outgoing bandwidth):")
for n, v in initial_sir(state, 0.8).scores.items():
    print(f"  {n}  {v:.4f}")

plain = personalized_sir(state, 0, SirParams())
print(f"converged in {plain.iterations} sweeps, ranking {[str(n) for n in plain.ranked()]}")

# pretend s3 already hosts an instance of type 0
state.hosts = {0: frozenset({s[3]})}
biased = personalized_sir(state, 0, SirParams())
for n in s:
    print(f"  {n}  {plain[n]:.4f} -> {biased[n]:.4f}")

# The capacity weight multiplies every node mass by the same pi * (1 - pi),
# so it cancels when the masses are normalized: the ranking does not move.
for pi in (0.8, 0.4, 0.1):
    print(pi, [round(x, 6) for x in initial_sir(ResidualState.fresh(t), pi).scores.values()])
