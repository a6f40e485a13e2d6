"""Applications of dynamic connectivity: minimum spanning forests and bipartiteness."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

from scipy.cluster.hierarchy import DisjointSet

from ._rand import derive_seed
from .connectivity import (DELETE, INSERT, Connectivity, DuplicateEdgeError, GraphUpdateError,
                           MissingEdgeError, Update, default_k_max)
from .euler_tour import EulerForest
from .mpc_engine import BatchSizeError, EngineConfig, MPCEngine


class WeightRangeError(GraphUpdateError):
    pass


def _key(u: int, v: int, w: float) -> tuple[float, int, int]:
    return (w, min(u, v), max(u, v))


class ExactMSF:
    """Exact minimum spanning forest under edge insertions.

    Ties are broken by (w, u, v).  Edges outside the forest are dropped for
    good: in an insertion-only stream an edge that is the heaviest on some
    cycle never re-enters the minimum spanning forest.
    """

    def __init__(self, n: int, engine: MPCEngine | None = None, k_max: int | None = None):
        self.n = n
        self.engine = engine if engine is not None else MPCEngine(EngineConfig(n, 0.5))
        self.k_max = k_max if k_max is not None else default_k_max(n, self.engine.config.phi)
        self.forest = EulerForest(n, self.engine)
        self.C = list(range(n))
        self.weight_of: dict[tuple[int, int], float] = {}
        self.seen: set[tuple[int, int]] = set()
        self.passes = 0
        self.engine.allocate("msf:component-map", n)
        self._account()

    def _account(self) -> None:
        self.engine.allocate("msf:forest", sum(len(o) for o in self.forest.ind.values()) + 3 * self.n
                             + 3 * len(self.weight_of))
        self.engine.allocate("msf:seen", 2 * len(self.seen))

    def _relabel(self, tids: Iterable[int]) -> int:
        changed = 0  # tours whose label moved; machines relabel their vertices locally
        for tid in set(tids):
            vs = self.forest.tours[tid].vertices
            m = min(vs)
            moved = False
            for x in vs:
                if self.C[x] != m:
                    self.C[x] = m
                    moved = True
            changed += moved
        return changed

    def _check_new(self, u: int, v: int, w: float, batch_seen: set | None = None) -> tuple[int, int]:
        e = (min(u, v), max(u, v))
        if u == v or not (0 <= u < self.n and 0 <= v < self.n):
            raise GraphUpdateError(f"invalid edge ({u}, {v})")
        if e in self.seen or (batch_seen is not None and e in batch_seen):
            raise DuplicateEdgeError(f"edge {e} already inserted")
        if w is None:
            raise GraphUpdateError(f"edge {e} needs a weight")
        return e

    def _heaviest_on_path(self, u: int, v: int) -> tuple[int, int]:
        path = self.forest.identify_path(u, v, charge=False)
        return max(path, key=lambda e: _key(*e, self.weight_of[e]))

    def msf_insert(self, u: int, v: int, w: float) -> None:
        e = self._check_new(u, v, w)
        self.seen.add(e)
        f = self.forest
        self.engine.broadcast(3)
        if self.C[u] != self.C[v]:
            f.reroot(f.tour_of[u], u)
            f.reroot(f.tour_of[v], v)
            f.join(u, v)
            self.weight_of[e] = w
            self._relabel([f.tour_of[u]])
            self.engine.broadcast(2)
        else:
            self.engine.broadcast(4)
            path_len = len(f.identify_path(u, v, charge=False))
            self.engine.charge_aggregate(path_len, 4)
            heavy = self._heaviest_on_path(u, v)
            if _key(*heavy, self.weight_of[heavy]) > _key(u, v, w):
                f.split(*heavy)
                del self.weight_of[heavy]
                f.reroot(f.tour_of[u], u)
                f.reroot(f.tour_of[v], v)
                f.join(u, v)
                self.weight_of[e] = w
        self._account()

    def msf_batch_insert(self, batch: Sequence[Update]) -> int:
        """Insert a batch; returns the number of cross/intra passes used."""
        if len(batch) > self.k_max:
            raise BatchSizeError("k_max", f"batch of {len(batch)} updates exceeds k_max={self.k_max}",
                                 words=len(batch), cap=self.k_max)
        staged: set[tuple[int, int]] = set()
        pending = []
        for up in batch:
            if up.op != INSERT:
                raise GraphUpdateError("exact MSF accepts insertions only")
            e = self._check_new(up.u, up.v, up.w, staged)
            staged.add(e)
            pending.append((e[0], e[1], float(up.w)))
        self.engine.batch_intake(list(batch), record_width=4)
        self.seen |= staged
        self.engine.disseminate(4 * len(pending))
        f = self.forest
        passes = 0
        while pending:
            passes += 1
            self.engine.gather(2 * len(pending))
            cross = sorted((p for p in pending if self.C[p[0]] != self.C[p[1]]), key=lambda p: _key(*p))
            intra = [p for p in pending if self.C[p[0]] == self.C[p[1]]]
            # cross-component phase: Kruskal over the component graph
            ids = sorted({self.C[x] for p in cross for x in p[:2]})
            ds = DisjointSet(ids)
            X, leftover = [], []
            for u, v, w in cross:
                if ds.connected(self.C[u], self.C[v]):
                    leftover.append((u, v, w))
                else:
                    ds.merge(self.C[u], self.C[v])
                    X.append((u, v, w))
            roots = f.batch_join([(u, v) for u, v, _ in X])
            for u, v, w in X:
                self.weight_of[(u, v)] = w
            self.engine.disseminate(2 * self._relabel(roots))
            # intra-component phase: evict heaviest path edges that lose to the new edge
            self.engine.disseminate(4 * len(intra))
            longest = 0
            evicted, winners = set(), []
            for u, v, w in intra:
                path = f.identify_path(u, v, charge=False)
                longest = max(longest, len(path))
                heavy = max(path, key=lambda e: _key(*e, self.weight_of[e]))
                if _key(*heavy, self.weight_of[heavy]) > _key(u, v, w):
                    evicted.add(heavy)
                    winners.append((u, v, w))
            self.engine.charge_aggregate(max(1, longest), 4, parallel=max(1, len(intra)))
            reinsert = [(a, b, self.weight_of[(a, b)]) for a, b in sorted(evicted)]
            tids = f.batch_split(sorted(evicted))
            for e in evicted:
                del self.weight_of[e]
            self.engine.disseminate(2 * self._relabel(tids))
            pending = leftover + winners + reinsert
        self.passes = passes
        self._account()
        return passes

    def forest_edges(self) -> list[tuple[int, int, float]]:
        return sorted((u, v, w) for (u, v), w in self.weight_of.items())

    def weight(self) -> float:
        return sum(self.weight_of.values())


def level_count(W: float, epsilon: float) -> int:
    """t = ceil(log_{1+eps} W)."""
    if W < 1 or epsilon <= 0:
        raise ValueError("need W >= 1 and epsilon > 0")
    return max(0, math.ceil(math.log(W) / math.log1p(epsilon) - 1e-9))


def weight_level(w: float, epsilon: float) -> int:
    """Smallest i with w <= (1+eps)^i."""
    i = max(0, math.ceil(math.log(w) / math.log1p(epsilon) - 1e-9))
    while i > 0 and w <= (1 + epsilon) ** (i - 1) * (1 + 1e-12):
        i -= 1
    while w > (1 + epsilon) ** i * (1 + 1e-12):
        i += 1
    return i


def weight_estimate(n: int, epsilon: float, counts: Sequence[int]) -> float:
    """Weight of the forest after rounding every weight up to a power of 1+eps.

    With c_{-1} = n and c_i = cc(G_i), that weight is
    n + sum_{i<t} lambda_i c_i - (1+eps)^t c_t with lambda_i = (1+eps)^{i+1} - (1+eps)^i.
    """
    t = len(counts) - 1
    b = 1 + epsilon
    total = n - b ** t * counts[t]
    for i in range(t):
        total += (b ** (i + 1) - b ** i) * counts[i]
    return total


class ApproxMSF:
    """(1+eps)-approximate MSF weight and forest over t+1 threshold graphs."""

    def __init__(self, n: int, W: float, epsilon: float, engine: MPCEngine | None = None, *,
                 seed: int = 0, k_max: int | None = None):
        self.n, self.W, self.epsilon = n, float(W), float(epsilon)
        self.t = level_count(self.W, self.epsilon)
        if engine is None:
            engine = MPCEngine(EngineConfig(n, 0.5, c_total=64.0 * (self.t + 1)))
        self.engine = engine
        self.k_max = k_max if k_max is not None else default_k_max(n, engine.config.phi)
        self.levels = [Connectivity(n, engine, seed=derive_seed(seed, i), k_max=self.k_max, name=f"level{i}")
                       for i in range(self.t + 1)]
        self.weight_of: dict[tuple[int, int], float] = {}

    def level_of(self, w: float) -> int:
        if not 1 <= w <= self.W:
            raise WeightRangeError(f"weight {w} outside [1, {self.W}]")
        return weight_level(w, self.epsilon)

    def apply_batch(self, batch: Sequence[Update]) -> None:
        staged = dict(self.weight_of)
        routed = []
        for up in sorted(batch, key=lambda x: x.op != INSERT):
            if up.op == INSERT:
                if up.w is None:
                    raise GraphUpdateError(f"edge {up.edge} needs a weight")
                if up.edge in staged:
                    raise DuplicateEdgeError(f"edge {up.edge} already present")
                lvl = self.level_of(float(up.w))
                staged[up.edge] = float(up.w)
            else:
                if up.edge not in staged:
                    raise MissingEdgeError(f"edge {up.edge} not present")
                lvl = self.level_of(staged.pop(up.edge))
            routed.append((lvl, up))
        if len(batch) > self.k_max:
            raise BatchSizeError("k_max", f"batch of {len(batch)} updates exceeds k_max={self.k_max}",
                                 words=len(batch), cap=self.k_max)
        self.engine.batch_intake(list(batch), record_width=4)
        self.engine.run_parallel([
            (lambda conn=conn, i=i: conn.apply_batch([up for lvl, up in routed if lvl <= i], intake=False))
            for i, conn in enumerate(self.levels)])
        self.weight_of = staged
        self.engine.allocate("msf-approx:weights", 3 * len(staged))

    def counts(self) -> list[int]:
        return self.engine.run_parallel([conn.count_components for conn in self.levels])

    def msf_weight_approx(self) -> float:
        counts = self.counts()
        self.engine.gather(len(counts))
        return weight_estimate(self.n, self.epsilon, counts)

    def msf_forest_approx(self) -> list[tuple[int, int, float]]:
        # every level checks its own forest against the level below in one exchange
        self.engine.disseminate(self.n)
        forests = [conn.query() for conn in self.levels]
        labels = [conn.C for conn in self.levels]
        return stitch_forests(self.n, forests, labels, self.weight_of)


def stitch_forests(n: int, forests: Sequence[Sequence[tuple[int, int]]], labels: Sequence[Sequence[int]],
                   weight_of: dict[tuple[int, int], float]) -> list[tuple[int, int, float]]:
    """Level i contributes F_i edges joining different C_{i-1} components.

    The contributed edges also pass a union-find over the forest built so
    far: two F_i edges may link the same pair of C_{i-1} components, and
    keeping both would close a cycle.
    """
    ds = DisjointSet(range(n))
    out = []
    prev = list(range(n))
    for forest, C in zip(forests, labels):
        for u, v in forest:
            if prev[u] != prev[v] and not ds.connected(u, v):
                ds.merge(u, v)
                out.append((u, v, weight_of[(u, v)]))
        prev = C
    return sorted(out)


class Bipartiteness:
    """G is bipartite iff its double cover has exactly twice as many components."""

    def __init__(self, n: int, engine: MPCEngine | None = None, *, seed: int = 0, k_max: int | None = None):
        if engine is None:
            engine = MPCEngine(EngineConfig(n, 0.5, c_total=64.0 * 4))
        self.n = n
        self.engine = engine
        k = k_max if k_max is not None else default_k_max(n, engine.config.phi)
        self.g = Connectivity(n, engine, seed=derive_seed(seed, 1), k_max=k, name="G")
        self.cover = Connectivity(2 * n, engine, seed=derive_seed(seed, 2), k_max=2 * k, name="G'")

    def cover_updates(self, batch: Sequence[Update]) -> list[Update]:
        n = self.n
        out = []
        for up in batch:
            out.append(Update(up.op, up.u, up.v + n))
            out.append(Update(up.op, up.u + n, up.v))
        return out

    def apply_batch(self, batch: Sequence[Update]) -> None:
        self.g.validate(batch)
        self.engine.batch_intake(list(batch), record_width=3)
        cover = self.cover_updates(batch)
        self.engine.run_parallel([lambda: self.g.apply_batch(batch, intake=False),
                                  lambda: self.cover.apply_batch(cover, intake=False)])

    def bipartite_query(self) -> bool:
        cg, cc = self.engine.run_parallel([self.g.count_components, self.cover.count_components])
        return cc == 2 * cg
