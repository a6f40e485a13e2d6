"""Regenerate tests/data/frozen.json from brute-force computations.

Uses networkx and itertools directly; nothing here touches mpcgraph's
algorithm code.  Run: python tests/make_frozen.py
"""

import itertools
import json
import random
from pathlib import Path

import networkx as nx


def weighted_graph(seed, n=40, m=120, wmax=9):
    rng = random.Random(seed)
    edges = {}
    while len(edges) < m:
        u, v = sorted(rng.sample(range(n), 2))
        edges.setdefault((u, v), rng.randint(1, wmax))
    return n, sorted((u, v, w) for (u, v), w in edges.items())


def msf_weight(n, edges):
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_weighted_edges_from(edges)
    return sum(d["weight"] for *_, d in nx.minimum_spanning_edges(g, data=True))


def small_graph(seed, n=9, m=11):
    rng = random.Random(seed)
    pairs = list(itertools.combinations(range(n), 2))
    return n, sorted(rng.sample(pairs, m))


def brute_bipartite(n, edges):
    for mask in range(1 << n):
        if all(((mask >> u) & 1) != ((mask >> v) & 1) for u, v in edges):
            return True
    return False


def brute_matching(n, edges):
    best = 0
    for r in range(1, n // 2 + 1):
        found = False
        for combo in itertools.combinations(edges, r):
            ends = [x for e in combo for x in e]
            if len(set(ends)) == len(ends):
                found = True
                break
        if not found:
            break
        best = r
    return best


def main():
    out = {"msf": [], "bipartite": [], "matching": []}
    for seed in range(5):
        n, edges = weighted_graph(seed)
        out["msf"].append({"seed": seed, "n": n, "edges": edges, "weight": msf_weight(n, edges)})
    for seed in range(12):
        n, edges = small_graph(seed, m=7 if seed % 2 else 11)
        out["bipartite"].append({"n": n, "edges": edges, "bipartite": brute_bipartite(n, edges)})
        out["matching"].append({"n": n, "edges": edges, "nu": brute_matching(n, edges)})
    path = Path(__file__).with_name("data") / "frozen.json"
    path.write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
