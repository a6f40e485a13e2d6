"""Random operation sessions on an EulerForest, checked against the oracle."""

from __future__ import annotations

import random

from mpcgraph.euler_tour import EulerForest


def check_invariants(ef: EulerForest) -> None:
    for T in ef.tours.values():
        assert T.length == 4 * (len(T.vertices) - 1)
        if T.length:
            assert ef.f(T.root) == 1
        for x in T.vertices:
            assert ef.tour_of[x] == T.tour_id
            assert len(ef.ind[x]) == 2 * len(ef.adj[x])
            assert all(ef.f(x) <= i <= ef.l(x) for i in ef.ind[x])


def random_op(ef: EulerForest, rng: random.Random, fan_in: int = 8) -> str:
    n = ef.n
    tree_edges = ef.edges()
    big = [t for t in ef.tours.values() if t.length]
    kind = rng.choice(["reroot", "join", "split", "batch_join", "batch_split"])
    if kind == "reroot" and big:
        T = rng.choice(big)
        ef.reroot(T.tour_id, rng.choice(sorted(T.vertices)))
    elif kind == "join" and len(ef.tours) > 1:
        u, v = rng.sample(range(n), 2)
        if ef.connected(u, v):
            return "skip"
        ef.reroot(ef.tour_of[u], u)
        ef.reroot(ef.tour_of[v], v)
        ef.join(u, v)
    elif kind == "split" and tree_edges:
        ef.split(*rng.choice(tree_edges))
    elif kind == "batch_join" and len(ef.tours) > 1:
        tids = rng.sample(sorted(ef.tours), min(len(ef.tours), rng.randint(2, fan_in)))
        edges = []
        for i in range(1, len(tids)):
            a = tids[rng.randrange(i)]
            b = tids[i]
            edges.append((rng.choice(sorted(ef.tours[a].vertices)), rng.choice(sorted(ef.tours[b].vertices))))
        ef.batch_join(edges)
    elif kind == "batch_split" and tree_edges:
        ef.batch_split(rng.sample(tree_edges, min(len(tree_edges), rng.randint(1, fan_in))))
    else:
        return "skip"
    return kind


def run_session(seed: int, n: int | None = None, steps: int = 12) -> list[str]:
    """Returns a list of mismatch descriptions (empty when all steps agree)."""
    rng = random.Random(seed)
    n = n or rng.randint(2, 64)
    ef = EulerForest(n)
    bad = []
    for step in range(steps):
        kind = random_op(ef, rng)
        if kind == "skip":
            continue
        if not ef.matches_oracle():
            bad.append(f"seed {seed} step {step} {kind}")
            break
        check_invariants(ef)
    return bad
