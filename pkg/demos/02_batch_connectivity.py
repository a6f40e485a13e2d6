"""
Batch-dynamic connectivity on a simulated MPC cluster
=====================================================

A generated workload of mixed insertions and deletions is replayed against the
connectivity structure.  Each batch is charged rounds and memory by the engine,
and each query is checked against a union-find oracle.
"""

import math
import statistics

from mpcgraph.connectivity import default_k_max
from mpcgraph.harness import RunConfig, generate, run

# one run, printed the way the CLI prints it
wl = generate("erdos-renyi-mixed", 256, {}, seed=3, batches=20, batch_size=16)
report = run(wl, RunConfig(phi=0.75, seed=3, k_max=16))
print(report.table())

# with idealized accounting the per-batch round count does not move with n
print("  n   k_max  median rounds  peak words / (n log^3 n)")
for n in (64, 256, 1024, 4096):
    k = default_k_max(n, 0.5)
    rep = run(generate("erdos-renyi-mixed", n, {}, seed=n, batches=20, batch_size=k), RunConfig(phi=0.5))
    med = statistics.median(b["rounds"] for b in rep.batches)
    ratio = rep.summary["peak_total_memory"] / (n * math.log2(n) ** 3)
    print(f"{n:5d} {k:6d} {med:14.0f} {ratio:26.2f}")

# strict accounting pays for tree depths, which shrink as machines get bigger
for phi in (0.3, 0.5, 0.7):
    rep = run(generate("erdos-renyi-mixed", 1024, {}, seed=3, batches=20, batch_size=default_k_max(1024, phi)),
              RunConfig(phi=phi, accounting="strict"))
    print(f"phi={phi}: median strict rounds {statistics.median(b['rounds'] for b in rep.batches):.0f}")
