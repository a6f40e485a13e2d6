"""
Sampling a cut edge from summed vertex sketches
===============================================

Every vertex keeps a linear sketch of its signed incidence vector.  Adding the
sketches of a vertex set cancels the edges inside the set, so what is left
describes exactly the edges leaving it.
"""

import random

from mpcgraph.l0_sketch import SketchParams, edge_dimension, sample_cut_edge, vertex_sketch

n = 12
rng = random.Random(1)

# two triangles joined by a single bridge 2-7, plus a few stray edges
edges = {(0, 1), (1, 2), (0, 2), (6, 7), (7, 8), (6, 8), (2, 7), (3, 4), (9, 10)}
adj = {v: [] for v in range(n)}
for u, v in edges:
    adj[u].append(v)
    adj[v].append(u)

params = SketchParams(edge_dimension(n), "1/100", seed=42)
sketches = {v: vertex_sketch(params, n, v, adj[v]) for v in range(n)}
print("words per sketch:", params.words)

# the left triangle has one edge leaving it: the bridge
print("cut edge of {0,1,2}:", sample_cut_edge(sketches, {0, 1, 2}, n))

# the union of both triangles is closed, so its summed sketch is zero
print("cut edge of both triangles:", sample_cut_edge(sketches, {0, 1, 2, 6, 7, 8}, n))

# sampling is near uniform over the cut: count outcomes under fresh seeds
star = {v: [] for v in range(n)}
for leaf in range(1, 6):
    star[0].append(leaf)
    star[leaf].append(0)
hits = {}
for seed in range(2000):
    p = SketchParams(edge_dimension(n), "1/100", seed=rng.randrange(2 ** 40))
    sk = {v: vertex_sketch(p, n, v, star[v]) for v in range(n)}
    e = sample_cut_edge(sk, {0}, n)
    hits[e] = hits.get(e, 0) + 1
for e in sorted(hits, key=str):
    print(f"  {e}: {hits[e]}")
