"""Approximate maximum matching over update batches.

GreedyMatching handles insertion-only streams.  AKLYMatching keeps one
l0 sampler per active group pair and a maximal matching on the sampled
sparsifier H.  Tester and SizeEstimator decide and estimate the matching size.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from typing import Iterable, Sequence

from ._rand import KWiseHash, PairwiseHash, derive_seed
from .connectivity import DELETE, INSERT, GraphUpdateError, Update
from .l0_sketch import L0Sketch, SketchParams, edge_dimension, edge_from_index, edge_index, new_sketch
from .mpc_engine import BatchSizeError, EngineConfig, MPCEngine

Edge = tuple[int, int]

INSERTION_ONLY = "insertion-only"
DYNAMIC = "dynamic"


def _norm(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


def dynamic_batch_cap(s: int, kappa: float) -> int:
    """Largest dynamic batch: floor(s^(1 - kappa)), also bounded by one machine's intake."""
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    return max(1, min(s // 3, int(math.floor(s ** (1 - kappa) + 1e-9))))


class MaximalMatching:
    """Maximal matching of a small graph H kept on one machine.

    After edges leave or enter H only their endpoints and the partners
    freed by removed matching edges can violate maximality, so repair
    scans just those vertices.
    """

    def __init__(self):
        self.adj: dict[int, set[int]] = {}
        self.mate: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.mate) // 2

    def edges(self) -> list[Edge]:
        return sorted(_norm(a, b) for a, b in self.mate.items() if a < b)

    def h_edges(self) -> int:
        return sum(len(s) for s in self.adj.values()) // 2

    def remove(self, edges: Iterable[Edge]) -> set[int]:
        dirty = set()
        for u, v in edges:
            if v in self.adj.get(u, ()):
                self.adj[u].discard(v)
                self.adj[v].discard(u)
                if self.mate.get(u) == v:
                    del self.mate[u], self.mate[v]
                dirty.update((u, v))
        return dirty

    def add(self, edges: Iterable[Edge]) -> set[int]:
        dirty = set()
        for u, v in edges:
            self.adj.setdefault(u, set()).add(v)
            self.adj.setdefault(v, set()).add(u)
            dirty.update((u, v))
        return dirty

    def repair(self, vertices: Iterable[int]) -> int:
        added = 0
        for x in sorted(vertices):
            if x in self.mate:
                continue
            for y in sorted(self.adj.get(x, ())):
                if y not in self.mate:
                    self.mate[x], self.mate[y] = y, x
                    added += 1
                    break
        return added


class PairSketches:
    """Lazily materialized l0 samplers, one per group pair, plus their last outputs."""

    def __init__(self, n: int, params: SketchParams, engine: MPCEngine, name: str):
        self.n = n
        self.params = params
        self.engine = engine
        self.name = name
        self.table: dict[tuple[int, int], L0Sketch] = {}
        self.out: dict[tuple[int, int], Edge] = {}
        self.failures = 0

    def update(self, pair: tuple[int, int], u: int, v: int, delta: int) -> None:
        sk = self.table.get(pair)
        if sk is None:
            sk = self.table[pair] = new_sketch(self.params)
        sk.update_inplace(edge_index(self.n, u, v), delta)

    def sample(self, pair: tuple[int, int], belongs) -> Edge | None:
        sk = self.table.get(pair)
        idx = sk.query() if sk is not None else None
        if idx is None:
            self.out.pop(pair, None)
            return None
        e = edge_from_index(self.n, idx)
        if not belongs(pair, *e):
            self.failures += 1
            self.out.pop(pair, None)
            return None
        self.out[pair] = e
        return e

    def account(self) -> None:
        self.engine.allocate(f"{self.name}:pair-sketches", len(self.table) * self.params.words)
        self.engine.allocate(f"{self.name}:samples", 3 * len(self.out))


def _check_batch(batch: Sequence[Update], cap: int, what: str) -> None:
    if len(batch) > cap:
        raise BatchSizeError(what, f"batch of {len(batch)} updates exceeds cap {cap}",
                             words=3 * len(batch), cap=cap)


class GreedyMatching:
    """Greedy matching capped at ceil(c*n/alpha) for insertion-only streams."""

    def __init__(self, n: int, alpha: float = 1.0, engine: MPCEngine | None = None, *,
                 c: float = 2.0, cap: int | None = None, name: str = "greedy"):
        self.n = n
        self.engine = engine if engine is not None else MPCEngine(EngineConfig(n, 0.5))
        self.cap = cap if cap is not None else math.ceil(c * n / alpha)
        self.mate: dict[int, int] = {}
        self.name = name
        self.engine.allocate(f"{name}:matching", 0)

    def __len__(self) -> int:
        return len(self.mate) // 2

    def edges(self) -> list[Edge]:
        return sorted((a, b) for a, b in self.mate.items() if a < b)

    def greedy_batch_insert(self, batch: Sequence[Update | Edge], *, intake: bool = True) -> int:
        """Returns the number of edges added."""
        edges = []
        for up in batch:
            if isinstance(up, Update):
                if up.op != INSERT:
                    raise GraphUpdateError("greedy matching accepts insertions only")
                edges.append(up.edge)
            else:
                edges.append(_norm(*up))
        if intake:
            self.engine.batch_intake(edges, record_width=3)
        if len(self) >= self.cap:
            return 0
        self.engine.disseminate(2 * len(edges))
        # machines report which batch edges touch M; the coordinator keeps the rest
        self.engine.gather(len(edges))
        free = [e for e in edges if e[0] not in self.mate and e[1] not in self.mate]
        added = 0
        for u, v in free:
            if len(self) >= self.cap:
                break
            if u not in self.mate and v not in self.mate and u != v:
                self.mate[u], self.mate[v] = v, u
                added += 1
        self.engine.disseminate(2 * added)
        self.engine.allocate(f"{self.name}:matching", 2 * len(self))
        return added


def _pair_params(n: int, delta, seed: int) -> SketchParams:
    return SketchParams(edge_dimension(n), delta, seed)


class AklyInstance:
    """One guess OPT' of the active-pair sparsifier."""

    def __init__(self, n: int, opt_guess: int, alpha: float, engine: MPCEngine, seed: int, delta):
        self.n = n
        self.opt_guess = opt_guess
        self.beta = max(1, math.ceil(opt_guess / alpha))
        self.gamma = max(1, math.ceil(opt_guess / alpha ** 2))
        self.side = PairwiseHash(derive_seed(seed, 0))
        self.hL = PairwiseHash(derive_seed(seed, 1))
        self.hR = PairwiseHash(derive_seed(seed, 2))
        rng = random.Random(derive_seed(seed, 3))
        self.active = {(i, rng.randrange(self.beta)) for i in range(self.beta) for _ in range(self.gamma)}
        self.sketches = PairSketches(n, _pair_params(n, delta, derive_seed(seed, 4)), engine,
                                     f"akly{opt_guess}")
        self.H = MaximalMatching()

    def in_left(self, x: int) -> bool:
        return self.side.bucket(x, 2) == 0

    def pair_of(self, u: int, v: int) -> tuple[int, int] | None:
        lu, lv = self.in_left(u), self.in_left(v)
        if lu == lv:
            return None
        if not lu:
            u, v = v, u
        p = (self.hL.bucket(u, self.beta), self.hR.bucket(v, self.beta))
        return p if p in self.active else None

    def _belongs(self, pair, u, v) -> bool:
        return self.pair_of(u, v) == pair

    def apply(self, updates: Sequence[Update]) -> tuple[int, int, int]:
        """Returns (|U'|, |X|, |Y|)."""
        touched = {}
        for up in updates:
            p = self.pair_of(up.u, up.v)
            if p is not None:
                touched.setdefault(p, []).append(up)
        X = [self.sketches.out[p] for p in touched if p in self.sketches.out]
        dirty = self.H.remove(X)
        for p, ups in touched.items():
            for up in ups:
                self.sketches.update(p, up.u, up.v, 1 if up.op == INSERT else -1)
        Y = [e for e in (self.sketches.sample(p, self._belongs) for p in touched) if e is not None]
        dirty |= self.H.add(Y)
        self.H.repair(dirty)
        self.sketches.account()
        return sum(len(u) for u in touched.values()), len(X), len(Y)


class AKLYMatching:
    """O(alpha)-approximate matching under insertions and deletions."""

    def __init__(self, n: int, alpha: float, engine: MPCEngine | None = None, *, seed: int = 0,
                 kappa: float = 0.25, delta=Fraction(1, 100)):
        self.n = n
        self.alpha = float(alpha)
        self.engine = engine if engine is not None else MPCEngine(EngineConfig(n, 0.5))
        self.kappa = kappa
        self.batch_cap = dynamic_batch_cap(self.engine.s, kappa)
        guesses = []
        g = n
        while g >= 1:
            guesses.append(g)
            g //= 2
        self.instances = [AklyInstance(n, g, self.alpha, self.engine, derive_seed(seed, g), delta)
                          for g in guesses]

    @property
    def sketch_failures(self) -> int:
        return sum(inst.sketches.failures for inst in self.instances)

    def active_pairs(self) -> int:
        return sum(len(inst.active) for inst in self.instances)

    def akly_batch_update(self, batch: Sequence[Update]) -> None:
        _check_batch(batch, self.batch_cap, "akly_batch_update")
        eng = self.engine
        eng.batch_intake(list(batch), record_width=3)
        eng.disseminate(3 * len(batch))
        flags = xs = ys = 0
        for inst in self.instances:
            a, x, y = inst.apply(batch)
            flags, xs, ys = flags + a, xs + x, ys + y
        # all instances advance in lockstep through the same primitive schedule
        eng.gather(flags)
        eng.gather(2 * xs)
        eng.local_round(words_sent=2 * xs)
        eng.disseminate(3 * flags)
        eng.gather(2 * ys)
        eng.local_round(words_sent=2 * ys)
        eng.allocate("akly:H", sum(3 * inst.H.h_edges() + 2 * len(inst.H) for inst in self.instances))

    def instance_sizes(self) -> list[tuple[int, int]]:
        return [(inst.opt_guess, len(inst.H)) for inst in self.instances]

    def akly_query(self) -> list[Edge]:
        self.engine.gather(len(self.instances))
        best = max(self.instances, key=lambda inst: (len(inst.H), inst.opt_guess))
        return best.H.edges()


class Tester:
    """Distinguishes OPT >= k from OPT <= k/2 on the vertex-sampled subgraph G^p."""

    def __init__(self, n: int, k: int, mode: str = INSERTION_ONLY, engine: MPCEngine | None = None, *,
                 seed: int = 0, p: float = 1.0, group_factor: int = 4, delta=Fraction(1, 100),
                 name: str | None = None):
        if mode not in (INSERTION_ONLY, DYNAMIC):
            raise ValueError(f"unknown mode {mode!r}")
        if k < 1:
            raise ValueError("k must be positive")
        self.n, self.k, self.mode, self.p = n, k, mode, p
        self.engine = engine if engine is not None else MPCEngine(EngineConfig(n, 0.5))
        self.name = name or f"tester{k}"
        self.sampler = KWiseHash(derive_seed(seed, 0), 4) if p < 1 else None
        if mode == INSERTION_ONLY:
            self.greedy = GreedyMatching(n, engine=self.engine, cap=k, name=self.name)
        else:
            self.groups = group_factor * k
            self.h = PairwiseHash(derive_seed(seed, 1))
            self.sketches = PairSketches(n, _pair_params(n, delta, derive_seed(seed, 2)), self.engine, self.name)
            self.H = MaximalMatching()

    def sampled(self, x: int) -> bool:
        return self.sampler is None or self.sampler.keep(x, self.p)

    def _pair(self, u: int, v: int) -> tuple[int, int]:
        a, b = self.h.bucket(u, self.groups), self.h.bucket(v, self.groups)
        return (a, b) if a <= b else (b, a)

    def _belongs(self, pair, u, v) -> bool:
        return self._pair(u, v) == pair

    def matching_size(self) -> int:
        return len(self.greedy) if self.mode == INSERTION_ONLY else len(self.H)

    def update(self, batch: Sequence[Update], *, intake: bool = True) -> None:
        kept = [up for up in batch if self.sampled(up.u) and self.sampled(up.v)]
        if self.mode == INSERTION_ONLY:
            self.greedy.greedy_batch_insert(kept, intake=intake)
            return
        touched: dict[tuple[int, int], list[Update]] = {}
        for up in kept:
            touched.setdefault(self._pair(up.u, up.v), []).append(up)
        X = [self.sketches.out[p] for p in touched if p in self.sketches.out]
        dirty = self.H.remove(X)
        for p, ups in touched.items():
            for up in ups:
                self.sketches.update(p, up.u, up.v, 1 if up.op == INSERT else -1)
        Y = [e for e in (self.sketches.sample(p, self._belongs) for p in touched) if e is not None]
        dirty |= self.H.add(Y)
        self.H.repair(dirty)
        self.sketches.account()
        self.engine.allocate(f"{self.name}:H", 3 * self.H.h_edges())

    def verdict(self) -> bool:
        # strict: a matching of exactly k/2 edges is consistent with OPT = k/2
        return 2 * self.matching_size() > self.k


def tester_update(state: Tester, batch: Sequence[Update]) -> None:
    eng = state.engine
    cap = eng.batch_cap(3) if state.mode == INSERTION_ONLY else dynamic_batch_cap(eng.s, 0.25)
    _check_batch(batch, cap, "tester_update")
    if state.mode == DYNAMIC:
        eng.batch_intake(list(batch), record_width=3)
        eng.disseminate(3 * len(batch))
        eng.gather(2 * len(batch))
        eng.local_round(words_sent=2 * len(batch))
    state.update(batch)


def tester_verdict(state: Tester) -> bool:
    state.engine.gather(1)
    return state.verdict()


class SizeEstimator:
    """Matching size estimate from a geometric ladder of Tester instances.

    Target T is tested as Tester(G^p, k) with k = T for T <= k_cap, and for
    larger targets on a vertex sample with p^2 = k_cap / T so that k stays at
    k_cap.  The estimate is the largest target whose tester fires.
    """

    def __init__(self, n: int, alpha: float, mode: str = INSERTION_ONLY, engine: MPCEngine | None = None, *,
                 seed: int = 0, kappa: float = 0.25, group_factor: int = 4):
        self.n, self.alpha, self.mode = n, float(alpha), mode
        self.engine = engine if engine is not None else MPCEngine(EngineConfig(n, 0.5))
        self.kappa = kappa
        log_n = max(1, math.ceil(math.log2(n)))
        self.k_cap = max(1, min(n // 2, math.ceil(n * log_n / self.alpha ** 2)))
        self.ladder: list[tuple[int, Tester]] = []
        T = 1
        while T <= max(1, n // 2):
            if T <= self.k_cap:
                k, p = T, 1.0
            else:
                k, p = self.k_cap, math.sqrt(self.k_cap / T)
            self.ladder.append((T, Tester(n, k, mode, self.engine, seed=derive_seed(seed, T), p=p,
                                          group_factor=group_factor, name=f"ladder{T}")))
            T *= 2

    @property
    def batch_cap(self) -> int:
        if self.mode == INSERTION_ONLY:
            return self.engine.batch_cap(3)
        return dynamic_batch_cap(self.engine.s, self.kappa)

    def update(self, batch: Sequence[Update]) -> None:
        _check_batch(batch, self.batch_cap, "size_estimator")
        if self.mode == INSERTION_ONLY and any(up.op == DELETE for up in batch):
            raise GraphUpdateError("insertion-only estimator received a deletion")
        eng = self.engine
        eng.batch_intake(list(batch), record_width=3)
        eng.disseminate(3 * len(batch))
        eng.run_parallel([(lambda t=t: t.update(batch, intake=False)) for _, t in self.ladder])
        eng.gather(2 * len(batch) * len(self.ladder))
        eng.local_round(words_sent=2 * len(batch))

    def verdicts(self) -> list[tuple[int, bool]]:
        return [(T, t.verdict()) for T, t in self.ladder]

    def size_estimate(self) -> int:
        self.engine.gather(len(self.ladder))
        fired = [T for T, ok in self.verdicts() if ok]
        return max(fired, default=0)
