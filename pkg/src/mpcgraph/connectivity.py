"""Dynamic spanning forest and connectivity over sketches and Euler tours.

Two modes share one state layout:

* ``single``: one sketch per vertex with delta = n^-3; updates follow the
  insert / delete procedures one edge at a time.
* ``batch``: t = ceil(2 log2 n) sketch copies per vertex with delta = 1/4;
  a batch is processed as insertions then deletions, deletions repair the
  forest with a Boruvka loop that spends one fresh copy per round.

Batch processing follows a fixed schedule of engine primitives, so the number
of rounds charged depends only on the configured batch bound and not on which
updates happen to be inside a batch.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Iterable, Sequence

from scipy.cluster.hierarchy import DisjointSet

from ._rand import derive_seed
from .euler_tour import EulerForest
from .l0_sketch import SketchBank, SketchParams, edge_dimension, edge_from_index
from .mpc_engine import BatchSizeError, EngineConfig, MPCEngine

INSERT = "+"
DELETE = "-"


class GraphUpdateError(ValueError):
    pass


class DuplicateEdgeError(GraphUpdateError):
    pass


class MissingEdgeError(GraphUpdateError):
    pass


@dataclass(frozen=True)
class Update:
    op: str
    u: int
    v: int
    w: float | None = None

    @property
    def edge(self) -> tuple[int, int]:
        return (self.u, self.v) if self.u < self.v else (self.v, self.u)


UpdateBatch = Sequence[Update]


def ins(u: int, v: int, w: float | None = None) -> Update:
    return Update(INSERT, u, v, w)


def dele(u: int, v: int) -> Update:
    return Update(DELETE, u, v)


def default_k_max(n: int, phi: float) -> int:
    return max(1, math.ceil(n ** phi / (8 * math.log2(n) ** 3)))


def slice_width(s: int) -> int:
    """Words per sketch slice when a sketch is spread over consecutive machines."""
    return max(1, isqrt(s))


class Connectivity:
    def __init__(self, n: int, engine: MPCEngine | None = None, *, mode: str = "batch",
                 seed: int = 0, k_max: int | None = None, copies: int | None = None,
                 name: str = "conn"):
        if n < 2:
            raise ValueError("connectivity needs at least two vertices")
        if mode not in ("single", "batch"):
            raise ValueError(f"unknown mode {mode!r}")
        self.n = n
        self.mode = mode
        self.seed = seed
        self.name = name
        self.engine = engine if engine is not None else MPCEngine(EngineConfig(n, 0.5))
        self.k_max = k_max if k_max is not None else default_k_max(n, self.engine.config.phi)
        self.forest = EulerForest(n, self.engine)
        self.C = list(range(n))
        self.edges: set[tuple[int, int]] = set()
        self.N = edge_dimension(n)
        if mode == "single":
            delta, t = Fraction(1, n ** 3), 1
        else:
            delta, t = Fraction(1, 4), copies or math.ceil(2 * math.log2(n))
        self.generation = [0] * t
        self.bank = SketchBank([SketchParams(self.N, delta, self._copy_seed(c, 0)) for c in range(t)])
        self.fresh = deque(range(t))
        self.stale: list[int] = []
        self.boruvka_rounds = math.ceil(math.log2(2 * self.k_max)) + 1
        self.stats = {"sketch_failures": 0, "refreshes": 0, "boruvka_rounds": 0}
        self.engine.allocate(f"{name}:sketch-bank", n * self.bank.words_per_vector)
        self.engine.allocate(f"{name}:component-map", n)
        self._account()

    # -- helpers ----------------------------------------------------------------

    def _copy_seed(self, copy: int, generation: int) -> int:
        return derive_seed(self.seed, copy, generation)

    def _account(self) -> None:
        self.engine.allocate(f"{self.name}:edge-set", 2 * len(self.edges))
        self.engine.allocate(f"{self.name}:tours", sum(len(o) for o in self.forest.ind.values()) + 3 * self.n)

    def _slices(self) -> tuple[int, int]:
        w = slice_width(self.engine.s)
        return w, -(-self.bank.params[0].words // w)

    def _charge_sketch_aggregate(self, count: int, copies: int = 1) -> None:
        w, parts = self._slices()
        self.engine.charge_aggregate(count, w, parallel=parts * copies)

    def _charge_query(self) -> None:
        _, parts = self._slices()
        self.engine.charge_aggregate(parts, 2)

    def _set_labels(self, tids: Iterable[int]) -> int:
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

    def _decode(self, sketch, side: set[int]) -> tuple[int, int] | None:
        idx = sketch.query()
        if idx is None:
            return None
        x, y = edge_from_index(self.n, idx)
        if (x in side) == (y in side) or (x, y) not in self.edges:
            self.stats["sketch_failures"] += 1
            return None
        return x, y

    # -- queries ------------------------------------------------------------------

    def query(self) -> list[tuple[int, int]]:
        return self.forest.edges()

    def component_ids(self) -> list[int]:
        return list(self.C)

    def count_components(self) -> int:
        ids = self.engine.bulk_sort(self.C)
        return sum(1 for i, x in enumerate(ids) if i == 0 or x != ids[i - 1])

    def same_component(self, u: int, v: int) -> bool:
        self.engine.gather(2)
        return self.C[u] == self.C[v]

    # -- single-update mode -------------------------------------------------------

    def insert(self, u: int, v: int) -> None:
        e = (min(u, v), max(u, v))
        if u == v or e in self.edges:
            raise DuplicateEdgeError(f"edge {e} already present")
        self.edges.add(e)
        self.bank.add_edge(self.n, u, v, +1)
        self.engine.broadcast(3)
        if self.C[u] != self.C[v]:
            f = self.forest
            f.reroot(f.tour_of[u], u)
            f.reroot(f.tour_of[v], v)
            tid = f.join(u, v)
            self._set_labels([tid])
            self.engine.broadcast(2)
        self._account()

    def delete(self, u: int, v: int) -> None:
        e = (min(u, v), max(u, v))
        if e not in self.edges:
            raise MissingEdgeError(f"edge {e} not present")
        self.edges.discard(e)
        self.bank.add_edge(self.n, u, v, -1)
        self.engine.broadcast(3)
        f = self.forest
        if not f.has_edge(u, v):
            self._account()
            return
        f.split(u, v)
        Zu = f.tours[f.tour_of[u]].vertices
        self._charge_sketch_aggregate(len(Zu))
        self._charge_query()
        found = self._decode(self.bank.aggregate(Zu, 0), Zu)
        if found is not None:
            x, y = found
            f.reroot(f.tour_of[x], x)
            f.reroot(f.tour_of[y], y)
            f.join(x, y)
        else:
            self._set_labels([f.tour_of[u], f.tour_of[v]])
            self.engine.broadcast(2)
        self._account()

    # -- batch mode -----------------------------------------------------------

    def validate(self, batch: UpdateBatch) -> tuple[list[Update], list[Update]]:
        if len(batch) > self.k_max:
            raise BatchSizeError("k_max", f"batch of {len(batch)} updates exceeds k_max={self.k_max}",
                                 words=len(batch), cap=self.k_max)
        inserts = [up for up in batch if up.op == INSERT]
        deletes = [up for up in batch if up.op == DELETE]
        live = set(self.edges)
        for up in inserts:
            if up.u == up.v or not (0 <= up.u < self.n and 0 <= up.v < self.n):
                raise GraphUpdateError(f"invalid edge ({up.u}, {up.v})")
            if up.edge in live:
                raise DuplicateEdgeError(f"edge {up.edge} already present")
            live.add(up.edge)
        for up in deletes:
            if up.edge not in live:
                raise MissingEdgeError(f"edge {up.edge} not present")
            live.discard(up.edge)
        return inserts, deletes

    def apply_batch(self, batch: UpdateBatch, *, intake: bool = True) -> None:
        """Insertions first, then deletions, on a fixed primitive schedule.

        intake=False when a caller already took the batch in and derived this
        one from it machine-locally.
        """
        inserts, deletes = self.validate(batch)
        if intake:
            self.engine.batch_intake(list(batch), record_width=3)
        self.batch_insert(inserts, _validated=True)
        self.batch_delete(deletes, _validated=True)
        self._refresh_slot()
        self._account()

    def batch_insert(self, inserts: Sequence[Update], _validated: bool = False) -> list[tuple[int, int]]:
        if not _validated:
            self.validate(inserts)
            self.engine.batch_intake(list(inserts), record_width=3)
        for up in inserts:
            self.edges.add(up.edge)
            self.bank.add_edge(self.n, up.u, up.v, +1)
        self.engine.disseminate(3 * len(inserts))
        self.engine.gather(2 * len(inserts))
        F_H = self._spanning_edges_over_components([up.edge for up in inserts])
        self._join_and_relabel(F_H)
        if not _validated:
            self._account()
        return F_H

    def _spanning_edges_over_components(self, edges: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
        """Coordinator-local spanning forest of the component graph H."""
        ids = sorted({self.C[x] for e in edges for x in e})
        ds = DisjointSet(ids)
        out = []
        for u, v in edges:
            cu, cv = self.C[u], self.C[v]
            if cu != cv and not ds.connected(cu, cv):
                ds.merge(cu, cv)
                out.append((u, v))
        return out

    def _join_and_relabel(self, F_H: list[tuple[int, int]]) -> None:
        roots = self.forest.batch_join(F_H)
        changed = self._set_labels(roots)
        self.engine.disseminate(2 * changed)

    def batch_delete(self, deletes: Sequence[Update], _validated: bool = False) -> list[tuple[int, int]]:
        if not _validated:
            self.validate(deletes)
            self.engine.batch_intake(list(deletes), record_width=3)
        f = self.forest
        tree_dels = []
        for up in deletes:
            self.edges.discard(up.edge)
            self.bank.add_edge(self.n, up.u, up.v, -1)
            if f.has_edge(*up.edge):
                tree_dels.append(up.edge)
        self.engine.disseminate(3 * len(deletes))
        fragments = f.batch_split(tree_dels)
        F_H = self._boruvka(fragments)
        f.batch_join(F_H)
        changed = self._set_labels({f.tour_of[min(vs)] for vs in self._fragment_vertices.values()})
        self.engine.disseminate(2 * changed)
        if not _validated:
            self._refresh_slot()
            self._account()
        return F_H

    def _boruvka(self, fragments: list[int]) -> list[tuple[int, int]]:
        """Find replacement edges among fragments, one fresh sketch copy per round."""
        f = self.forest
        self._fragment_vertices = {t: set(f.tours[t].vertices) for t in fragments}
        vert_frag = {x: t for t, vs in self._fragment_vertices.items() for x in vs}
        biggest = max((len(vs) for vs in self._fragment_vertices.values()), default=1)
        copy_words = self.bank.params[0].words
        self.engine.allocate(f"{self.name}:fragment-sketches", len(fragments) * self.bank.copies * copy_words)
        self._charge_sketch_aggregate(biggest, copies=self.bank.copies)
        ds = DisjointSet(fragments)
        F_H: list[tuple[int, int]] = []
        rounds = 0
        quiet = 0
        while True:
            supers = [sorted(g) for g in ds.subsets()] if fragments else []
            active = len(supers) > 1 and quiet < 2 and bool(self.fresh)
            if rounds >= self.boruvka_rounds and not active:
                break
            width = max((len(g) for g in supers), default=1)
            self._charge_sketch_aggregate(width)
            self._charge_query()
            self.engine.gather(2 * len(supers))
            found = []
            if active:
                c = self.fresh.popleft()
                self.stale.append(c)
                for g in supers:
                    side = set().union(*(self._fragment_vertices[t] for t in g))
                    e = self._decode(self.bank.aggregate(side, c), side)
                    if e is not None:
                        found.append(e)
                merged = False
                for x, y in found:
                    a, b = vert_frag[x], vert_frag[y]
                    if not ds.connected(a, b):
                        ds.merge(a, b)
                        F_H.append((x, y))
                        merged = True
                quiet = 0 if merged else quiet + 1
            self.engine.disseminate(2 * len(found))
            rounds += 1
        self.stats["boruvka_rounds"] += rounds
        self.engine.release(f"{self.name}:fragment-sketches")
        return F_H

    def _refresh_slot(self) -> None:
        """Rebuild consumed sketch copies once fewer than a batch's worth remain."""
        if self.mode != "batch":
            self.engine.local_round()
            return
        sent = 0
        if len(self.fresh) < self.boruvka_rounds and self.stale:
            for c in self.stale:
                self.generation[c] += 1
                params = self.bank.params[c].with_seed(self._copy_seed(c, self.generation[c]))
                self.bank.reseed_copy(c, params, self.n, self.edges)
                self.fresh.append(c)
                sent += 2 * len(self.edges)
            self.stale = []
            self.stats["refreshes"] += 1
        self.engine.local_round(words_sent=sent)

    # -- consistency ----------------------------------------------------------

    def rebuilt_bank(self) -> SketchBank:
        """A bank built from scratch over the current edge set with the live seeds."""
        fresh = SketchBank(list(self.bank.params))
        for c, p in enumerate(self.bank.params):
            fresh.reseed_copy(c, p, self.n, self.edges)
        return fresh
