"""
Spanning forests with weights, and odd cycles
=============================================

Exact MSF under insertions, the level-counting estimate for dynamic weighted
graphs, and bipartiteness through the double cover.
"""

from mpcgraph import oracles
from mpcgraph.connectivity import dele, ins
from mpcgraph.mpc_engine import EngineConfig, MPCEngine
from mpcgraph.msf_apps import ApproxMSF, Bipartiteness, ExactMSF


def engine(n, scale=1.0):
    return MPCEngine(EngineConfig(n, 0.8, c_total=64.0 * scale, local_memory_override=128))


# exact MSF: a light edge arriving later replaces the heaviest edge on its cycle
m = ExactMSF(6, engine(6), k_max=8)
m.msf_batch_insert([ins(0, 1, 4), ins(1, 2, 6), ins(2, 3, 5), ins(3, 4, 3), ins(4, 5, 7)])
print("forest:", m.forest_edges(), "weight", m.weight())
m.msf_batch_insert([ins(0, 5, 1), ins(1, 4, 2)])
print("after two light edges:", m.forest_edges(), "weight", m.weight())

# approximate MSF with eps = 0.25 on weights up to 8
n = 10
a = ApproxMSF(n, 8, 0.25, engine(n, 16), seed=1, k_max=8)
live = {}
steps = [[ins(i, i + 1, 1 + (i * 3) % 8) for i in range(8)],
         [ins(0, 9, 2), ins(2, 7, 1), dele(4, 5)],
         [ins(4, 8, 8), dele(0, 1)]]
for batch in steps:
    a.apply_batch(batch)
    for up in batch:
        if up.op == "+":
            live[up.edge] = up.w
        else:
            live.pop(up.edge)
    K = sum(w for *_, w in oracles.kruskal(n, [(u, v, w) for (u, v), w in live.items()]))
    print(f"estimate {a.msf_weight_approx():7.3f}  kruskal {K:5.1f}  level counts {a.counts()}")

# bipartiteness: a 5-cycle is odd until one of its edges goes
b = Bipartiteness(8, engine(8, 4), k_max=8)
b.apply_batch([ins(i, (i + 1) % 5) for i in range(5)])
print("5-cycle bipartite?", b.bipartite_query())
b.apply_batch([dele(0, 4), ins(0, 5), ins(4, 5)])
print("now a 6-cycle, bipartite?", b.bipartite_query())
