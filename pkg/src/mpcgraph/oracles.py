"""Brute-force reference answers computed from the materialised edge set only."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import networkx as nx
from scipy.cluster.hierarchy import DisjointSet


def component_labels(n: int, edges: Iterable[tuple[int, int]]) -> list[int]:
    """Minimum vertex id of each vertex's component (union-find)."""
    ds = DisjointSet(range(n))
    for u, v in edges:
        ds.merge(u, v)
    out = [0] * n
    for group in ds.subsets():
        m = min(group)
        for x in group:
            out[x] = m
    return out


def count_components(n: int, edges: Iterable[tuple[int, int]]) -> int:
    return len(set(component_labels(n, edges)))


def is_spanning_forest(n: int, graph_edges: Iterable[tuple[int, int]],
                       forest: Iterable[tuple[int, int]]) -> bool:
    graph = {tuple(sorted(e)) for e in graph_edges}
    forest = [tuple(sorted(e)) for e in forest]
    if len(set(forest)) != len(forest) or any(e not in graph for e in forest):
        return False
    ds = DisjointSet(range(n))
    for u, v in forest:
        if ds.connected(u, v):
            return False
        ds.merge(u, v)
    return component_labels(n, forest) == component_labels(n, graph)


def kruskal(n: int, weighted_edges: Iterable[tuple[int, int, float]]) -> list[tuple[int, int, float]]:
    """Minimum spanning forest with ties broken by (w, u, v), u < v."""
    ds = DisjointSet(range(n))
    out = []
    norm = [(w, min(u, v), max(u, v)) for u, v, w in weighted_edges]
    for w, u, v in sorted(norm):
        if not ds.connected(u, v):
            ds.merge(u, v)
            out.append((u, v, w))
    return out


def is_bipartite(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    """BFS two-colouring."""
    adj = defaultdict(list)
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    colour: dict[int, int] = {}
    for s in range(n):
        if s in colour:
            continue
        colour[s] = 0
        dq = deque([s])
        while dq:
            x = dq.popleft()
            for y in adj[x]:
                if y not in colour:
                    colour[y] = 1 - colour[x]
                    dq.append(y)
                elif colour[y] == colour[x]:
                    return False
    return True


def max_matching_size(n: int, edges: Iterable[tuple[int, int]]) -> int:
    """Exact maximum matching size (Hopcroft-Karp when bipartite, blossom otherwise)."""
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    if nx.is_bipartite(g):
        total = 0
        for comp in nx.connected_components(g):
            if len(comp) < 2:
                continue
            sub = g.subgraph(comp)
            top = nx.bipartite.sets(sub)[0]
            total += len(nx.bipartite.hopcroft_karp_matching(sub, top_nodes=top)) // 2
        return total
    return len(nx.max_weight_matching(g, maxcardinality=True))


def max_matching_exhaustive(n: int, edges: Iterable[tuple[int, int]]) -> int:
    """Branching search; intended for n <= 24."""
    adj = defaultdict(set)
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)

    def best(free: frozenset) -> int:
        for x in sorted(free):
            nbrs = [y for y in adj[x] if y in free]
            if nbrs:
                skip = best(free - {x})
                take = max(1 + best(free - {x, y}) for y in nbrs)
                return max(skip, take)
        return 0

    return best(frozenset(v for v in range(n) if adj[v]))


def is_matching(edges: Iterable[tuple[int, int]]) -> bool:
    seen = set()
    for u, v in edges:
        if u == v or u in seen or v in seen:
            return False
        seen.update((u, v))
    return True


def tree_path(edges: Iterable[tuple[int, int]], u: int, v: int) -> set[tuple[int, int]]:
    adj = defaultdict(list)
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    parent = {u: None}
    dq = deque([u])
    while dq:
        x = dq.popleft()
        for y in adj[x]:
            if y not in parent:
                parent[y] = x
                dq.append(y)
    if v not in parent:
        raise ValueError("vertices are not connected")
    out = set()
    x = v
    while parent[x] is not None:
        out.add((min(x, parent[x]), max(x, parent[x])))
        x = parent[x]
    return out


# --- Euler tours -----------------------------------------------------------

@dataclass
class OracleTours:
    """Explicit tours: sequences keyed by root, occurrence lists per vertex."""

    sequences: dict[int, list[int]] = field(default_factory=dict)
    ind: dict[int, list[int]] = field(default_factory=dict)
    root_of: dict[int, int] = field(default_factory=dict)

    def dump(self, tour_ids: Mapping[int, int] | None = None) -> str:
        lines = []
        for root in sorted(self.sequences):
            seq = self.sequences[root]
            tid = root if tour_ids is None else tour_ids[root]
            lines.append(f"tour {tid} root {root} L {len(seq)}")
            lines.extend(f"occ {x} {i}" for i, x in enumerate(seq, start=1))
        return "\n".join(lines) + "\n"


def oracle_rebuild(vertices: Iterable[int], edges: Iterable[tuple[int, int]],
                   roots: Iterable[int] | None = None,
                   order: Callable[[int, list[int]], list[int]] | None = None) -> OracleTours:
    """Explicit Euler tours: every traversal of edge (x, y) appends x then y.

    Children are visited in ascending id unless `order` says otherwise.  One
    root per tree; trees without a listed root are rooted at their minimum.
    """
    vertices = sorted(set(vertices))
    adj = {x: [] for x in vertices}
    edge_list = [tuple(e) for e in edges]
    for a, b in edge_list:
        adj[a].append(b)
        adj[b].append(a)
    ds = DisjointSet(vertices)
    for a, b in edge_list:
        if ds.connected(a, b):
            raise ValueError("input is not a forest")
        ds.merge(a, b)
    chosen = {}
    for r in roots or ():
        key = ds[r]
        if key in chosen:
            raise ValueError("two roots given for one tree")
        chosen[key] = r
    out = OracleTours()
    for x in vertices:
        key = ds[x]
        if key not in chosen:
            chosen[key] = min(ds.subset(x))
    for root in sorted(chosen.values()):
        seq: list[int] = []
        frames = [(root, None, iter(_children(adj, root, None, order)))]
        while frames:
            x, parent, it = frames[-1]
            child = next(it, None)
            if child is None:
                frames.pop()
                if parent is not None:
                    seq.extend((x, parent))
                continue
            seq.extend((x, child))
            frames.append((child, x, iter(_children(adj, child, x, order))))
        out.sequences[root] = seq
        for x in ds.subset(root):
            out.root_of[x] = root
            out.ind.setdefault(x, [])
        for i, x in enumerate(seq, start=1):
            out.ind[x].append(i)
    return out


def _children(adj, x, parent, order):
    kids = sorted(y for y in adj[x] if y != parent)
    return order(x, kids) if order is not None else kids

