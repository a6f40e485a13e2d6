"""
Approximate matchings from small sketches
=========================================

Greedy matching for insertion-only streams, the active-pair sparsifier for
fully dynamic streams, and the matching-size estimator built from testers.
"""

import random

from mpcgraph import oracles
from mpcgraph.connectivity import dele, ins
from mpcgraph.matching import DYNAMIC, AKLYMatching, GreedyMatching, SizeEstimator
from mpcgraph.mpc_engine import EngineConfig, MPCEngine

rng = random.Random(0)
n = 256
half = n // 2
perm = list(range(half))
rng.shuffle(perm)
planted = [(a, half + perm[a]) for a in range(half)]
noise = sorted({(rng.randrange(half), half + rng.randrange(half)) for _ in range(n)} - set(planted))
stream = [ins(*e) for e in planted + noise]
rng.shuffle(stream)
nu = oracles.max_matching_size(n, planted + noise)
print("planted graph: nu =", nu)

for alpha in (1, 4):
    g = GreedyMatching(n, alpha, MPCEngine(EngineConfig(n, 0.5)))
    cap = g.engine.batch_cap(3)
    for i in range(0, len(stream), cap):
        g.greedy_batch_insert(stream[i:i + cap])
    print(f"greedy alpha={alpha}: |M| = {len(g)} (cap {g.cap})")

# the dynamic sparsifier keeps one pair sketch per active group pair
for alpha in (2, 8):
    eng = MPCEngine(EngineConfig(n, 0.5))
    A = AKLYMatching(n, alpha, eng, seed=1)
    ups = stream + [dele(*e) for e in noise[: len(noise) // 2]]
    for i in range(0, len(ups), A.batch_cap):
        A.akly_batch_update(ups[i:i + A.batch_cap])
    M = A.akly_query()
    live = sorted(set(planted) | set(noise[len(noise) // 2:]))
    print(f"akly alpha={alpha}: |M| = {len(M)}, nu/|M| = {oracles.max_matching_size(n, live) / len(M):.2f}, "
          f"active pairs {A.active_pairs()}")

# size estimation: the largest ladder target whose tester still fires
est = SizeEstimator(n, 2, DYNAMIC, MPCEngine(EngineConfig(n, 0.5)), seed=2)
for i in range(0, len(stream), est.batch_cap):
    est.update(stream[i:i + est.batch_cap])
print("ladder verdicts:", est.verdicts())
print("estimate", est.size_estimate(), "true nu", nu)
