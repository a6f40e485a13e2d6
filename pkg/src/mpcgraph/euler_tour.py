"""Distributed Euler-tour forest.

A tree with root r is traversed depth-first; every traversal of an edge (x, y)
contributes the two occurrences x, y, so a tree on m vertices has a tour of
length 4(m-1) with 1-based positions.  The state kept per vertex is only its
occurrence list ind_v (f = first, l = last); every update is expressed as
index arithmetic on those lists.

Index conventions that differ from a literal reading of the join offsets:
occurrences come in traversal pairs (odd, even), so a new subtree can only be
spliced in at a pair boundary.  The splice point for a vertex u is p(u) = f(u)
when f(u) is even (u is not the root) and p(u) = f(u) - 1 = 0 when u is the
root or a singleton (f = 0).  With that p, joining T_v below u shifts T_v by
p + 2, adds {p + 2, p + l(v) + 3} to ind_v and {p + 1, p + l(v) + 4} to ind_u,
and shifts indices of T_u above p by L_v + 4.  Rerooting at the current root is
the identity; the rotation i' = (i + L - l(u)) mod L + 1 is applied otherwise.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable

from scipy.cluster.hierarchy import DisjointSet

from .mpc_engine import MPCEngine
from .oracles import OracleTours, oracle_rebuild

__all__ = ["EulerForest", "ShiftMessage", "TourSummary", "TourError", "oracle_rebuild"]


class TourError(ValueError):
    pass


@dataclass
class TourSummary:
    tour_id: int
    root: int
    length: int
    vertices: set[int] = field(default_factory=set)


@dataclass(frozen=True)
class ShiftMessage:
    kind: str
    tour_id: int = -1
    lo: int = 0
    hi: int = 0
    delta: int = 0
    target: int = -1
    vertex: int = -1
    index: int = 0
    remove: bool = False

    @classmethod
    def shift(cls, tour_id: int, lo: int, hi: int, delta: int, target: int) -> ShiftMessage:
        return cls("shift-index", tour_id=tour_id, lo=lo, hi=hi, delta=delta, target=target)

    @classmethod
    def add(cls, vertex: int, index: int) -> ShiftMessage:
        return cls("update-index", vertex=vertex, index=index)

    @classmethod
    def drop(cls, vertex: int, index: int) -> ShiftMessage:
        return cls("update-index", vertex=vertex, index=index, remove=True)


def _edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class EulerForest:
    def __init__(self, n: int, engine: MPCEngine | None = None):
        self.n = n
        self.engine = engine
        self.ind: dict[int, list[int]] = {v: [] for v in range(n)}
        self.tour_of: dict[int, int] = {v: v for v in range(n)}
        self.tours: dict[int, TourSummary] = {v: TourSummary(v, v, 0, {v}) for v in range(n)}
        self.adj: dict[int, set[int]] = {v: set() for v in range(n)}
        self._next_tid = n
        self.last_sequence: list[tuple[str, tuple[int, int] | None]] = []
        self.last_messages: list[ShiftMessage] = []

    # -- accessors ------------------------------------------------------------

    def f(self, v: int) -> int:
        occ = self.ind[v]
        return occ[0] if occ else 0

    def l(self, v: int) -> int:
        occ = self.ind[v]
        return occ[-1] if occ else 0

    def root(self, tid: int) -> int:
        return self.tours[tid].root

    def length(self, tid: int) -> int:
        return self.tours[tid].length

    def edges(self) -> list[tuple[int, int]]:
        return sorted(_edge(u, v) for u in self.adj for v in self.adj[u] if u < v)

    def tree_edges(self, tid: int) -> list[tuple[int, int]]:
        vs = self.tours[tid].vertices
        return sorted(_edge(u, v) for u in vs for v in self.adj[u] if u < v)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj[u]

    def connected(self, u: int, v: int) -> bool:
        return self.tour_of[u] == self.tour_of[v]

    def _fresh_tid(self) -> int:
        tid = self._next_tid
        self._next_tid += 1
        return tid

    def _charge_bcast(self, words: int) -> None:
        if self.engine is not None:
            self.engine.disseminate(words)

    def _charge_gather(self, words: int) -> None:
        if self.engine is not None:
            self.engine.gather(words)

    def splice_point(self, u: int) -> int:
        fu = self.f(u)
        return fu if fu % 2 == 0 else fu - 1

    def parent_child(self, u: int, v: int) -> tuple[int, int]:
        """Order a tree edge as (ancestor, descendant) with the f/l test."""
        fu, lu, fv, lv = self.f(u), self.l(u), self.f(v), self.l(v)
        if fu < fv and lu > lv:
            return u, v
        if fv < fu and lv > lu:
            return v, u
        raise TourError(f"f/l values of ({u}, {v}) admit no ancestor relation")

    def records(self, tid: int) -> dict[tuple[int, int], tuple[int, int, int, int]]:
        """The four occurrence positions contributed by each tree edge."""
        out = {}
        for e in self.tree_edges(tid):
            a, b = self.parent_child(*e)
            fb, lb = self.f(b), self.l(b)
            out[e] = (fb - 1, fb, lb, lb + 1)
        return out

    # -- single-tree operations ---------------------------------------------

    def _rotate(self, tid: int, u: int) -> None:
        t = self.tours[tid]
        if u not in t.vertices:
            raise TourError(f"vertex {u} is not in tour {tid}")
        if t.length == 0 or t.root == u:
            return
        L, lu = t.length, self.l(u)
        for x in t.vertices:
            self.ind[x] = sorted((i + L - lu) % L + 1 for i in self.ind[x])
        t.root = u

    def reroot(self, tid: int, u: int) -> None:
        self._rotate(tid, u)
        self._charge_bcast(3)

    def _link(self, u: int, v: int) -> None:
        """Splice v's tour (rooted at v) into u's tour at p(u)."""
        tu, tv = self.tour_of[u], self.tour_of[v]
        Tu, Tv = self.tours[tu], self.tours[tv]
        p = self.splice_point(u)
        lv = self.l(v)
        shift_u = Tv.length + 4
        for x in Tu.vertices:
            self.ind[x] = [i + shift_u if i > p else i for i in self.ind[x]]
        for x in Tv.vertices:
            self.ind[x] = [i + p + 2 for i in self.ind[x]]
            self.tour_of[x] = tu
        self.ind[u] = sorted(self.ind[u] + [p + 1, p + lv + 4])
        self.ind[v] = sorted(self.ind[v] + [p + 2, p + lv + 3])
        Tu.length += Tv.length + 4
        Tu.vertices |= Tv.vertices
        del self.tours[tv]
        self.adj[u].add(v)
        self.adj[v].add(u)

    def join(self, u: int, v: int) -> int:
        """Join tour of u (rooted at u) with tour of v (rooted at v) by edge {u, v}."""
        tu, tv = self.tour_of[u], self.tour_of[v]
        if tu == tv:
            raise TourError(f"{u} and {v} already share tour {tu}")
        if self.tours[tu].root != u or self.tours[tv].root != v:
            raise TourError("join expects both tours rooted at the edge endpoints")
        self._link(u, v)
        self._charge_bcast(6)
        return tu

    def split(self, u: int, v: int) -> tuple[int, int]:
        """Remove tree edge {u, v}; returns (ancestor-side tid, descendant-side tid)."""
        if v not in self.adj[u]:
            raise TourError(f"({u}, {v}) is not a tree edge")
        self._charge_gather(4)
        a, b = self.parent_child(u, v)
        tid = self.tour_of[a]
        T = self.tours[tid]
        fb, lb = self.f(b), self.l(b)
        self.ind[a].remove(fb - 1)
        self.ind[a].remove(lb + 1)
        self.ind[b].remove(fb)
        self.ind[b].remove(lb)
        new = self._fresh_tid()
        below = {x for x in T.vertices if x == b or fb < self.f(x) < lb}
        gap = lb - fb + 3
        for x in T.vertices:
            if x in below:
                self.ind[x] = [i - fb for i in self.ind[x]]
                self.tour_of[x] = new
            else:
                self.ind[x] = [i - gap if i > lb else i for i in self.ind[x]]
        T.vertices -= below
        T.length -= lb - fb + 3
        self.tours[new] = TourSummary(new, b, lb - fb - 1, below)
        self.adj[a].discard(b)
        self.adj[b].discard(a)
        self._charge_bcast(6)
        return tid, new

    def identify_path(self, u: int, v: int, charge: bool = True) -> set[tuple[int, int]]:
        """Tree edges on the u-v path, decided per edge from f/l of u and v.

        An edge (parent a, child c) is on the path iff exactly one of u, v
        lies in the subtree of c, i.e. inside [f(c), l(c)].
        """
        if not self.connected(u, v):
            raise TourError(f"{u} and {v} lie in different tours")
        if u == v:
            return set()
        if charge:
            self._charge_bcast(4)
        if self.f(u) > self.f(v):
            u, v = v, u
        fu, lu, fv, lv = self.f(u), self.l(u), self.f(v), self.l(v)
        out = set()
        for e in self.tree_edges(self.tour_of[u]):
            _, c = self.parent_child(*e)
            fc, lc = self.f(c), self.l(c)
            has_u = fc <= fu and lu <= lc
            has_v = fc <= fv and lv <= lc
            if has_u != has_v:
                out.add(e)
        return out

    # -- batched operations ---------------------------------------------------

    def _apply(self, drops: list[ShiftMessage], shifts: list[ShiftMessage],
               adds: list[ShiftMessage]) -> dict[int, int]:
        """Apply update-index removals, then shifts, then additions.

        Returns the target tour id of every vertex that kept an index.
        """
        for m in set(drops):
            self.ind[m.vertex].remove(m.index)
        by_tid: dict[int, list[ShiftMessage]] = defaultdict(list)
        for m in set(shifts):
            by_tid[m.tour_id].append(m)
        moved: dict[int, int] = {}
        for tid, ms in by_tid.items():
            ms.sort(key=lambda m: m.lo)
            for a, b in zip(ms, ms[1:]):
                if a.hi >= b.lo:
                    raise TourError(f"overlapping shift intervals in tour {tid}")
            los = [m.lo for m in ms]
            for x in self.tours[tid].vertices:
                occ = self.ind[x]
                if not occ:
                    continue
                new, target = [], None
                for z in occ:
                    k = bisect_right(los, z) - 1
                    if k < 0 or z > ms[k].hi:
                        raise TourError(f"index {z} of vertex {x} not covered by any shift")
                    m = ms[k]
                    if target is None:
                        target = m.target
                    elif target != m.target:
                        raise TourError(f"vertex {x} spread over two tours")
                    new.append(z + m.delta)
                self.ind[x] = new
                moved[x] = target
        for m in set(adds):
            self.ind[m.vertex].append(m.index)
        for x in {m.vertex for m in adds} | set(moved):
            self.ind[x].sort()
        return moved

    def batch_join(self, inter_edges: Iterable[tuple[int, int]]) -> list[int]:
        """Join several trees along a forest of inter-tree edges at once.

        Per merged tree: the tree with the smallest id is the root node T_1
        (below a virtual T_0); every other tree is rerooted at its upward
        terminal; the auxiliary sequence S lists children in ascending p(u)
        order; one scan over consecutive symbol pairs emits the messages.
        """
        inter = [tuple(e) for e in inter_edges]
        if not inter:
            # keep the primitive schedule identical for empty batches
            self._charge_bcast(0)
            self._charge_gather(0)
            self._charge_bcast(0)
            return []
        tids = sorted({self.tour_of[x] for e in inter for x in e})
        ds = DisjointSet(tids)
        hadj: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
        for u, v in inter:
            tu, tv = self.tour_of[u], self.tour_of[v]
            if tu == tv or ds.connected(tu, tv):
                raise TourError("inter-tree edges contain a cycle over the trees")
            ds.merge(tu, tv)
            hadj[tu].append((u, v, tv))
            hadj[tv].append((v, u, tu))
        # orient T_H from its smallest tour id
        parent: dict[int, tuple[int, int, int] | None] = {}
        kids: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
        roots = []
        for t in tids:
            if t in parent:
                continue
            roots.append(t)
            parent[t] = None
            dq = deque([t])
            while dq:
                a = dq.popleft()
                for u, w, b in hadj[a]:
                    if b not in parent:
                        parent[b] = (u, w, a)
                        kids[a].append((u, w, b))
                        dq.append(b)
        for t, pe in parent.items():
            if pe is not None:
                self._rotate(t, pe[1])
        self._charge_bcast(3 * (len(tids) - len(roots)))
        self._charge_gather(2 * len(inter))
        # auxiliary sequence S with virtual edge e_0 on top of each root node
        S: list[tuple[str, tuple]] = []
        for r in roots:
            virtual = (None, None, r)
            S.append(("fwd", virtual))
            stack = [(r, iter(sorted(kids[r], key=lambda k: (self.splice_point(k[0]), k[0], k[1]))))]
            while stack:
                a, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    stack.pop()
                    if stack:
                        S.append(("back", (parent[a][0], parent[a][1], a)))
                    continue
                S.append(("fwd", nxt))
                b = nxt[2]
                stack.append((b, iter(sorted(kids[b], key=lambda k: (self.splice_point(k[0]), k[0], k[1])))))
            S.append(("back", virtual))
        self.last_sequence = [(kind, None if sym[0] is None else _edge(sym[0], sym[1])) for kind, sym in S]
        shifts, adds = self._scan_join(S)
        self.last_messages = shifts + adds
        self._charge_bcast(5 * len(inter) + len(roots))
        # merged summaries
        new_tours = {}
        for r in roots:
            comp = [t for t in tids if ds.connected(t, r)]
            T = self.tours[r]
            new_tours[r] = TourSummary(r, T.root, sum(self.tours[t].length for t in comp) + 4 * (len(comp) - 1),
                                       set().union(*(self.tours[t].vertices for t in comp)))
        self._apply([], shifts, adds)
        for t in tids:
            del self.tours[t]
        for r, T in new_tours.items():
            self.tours[r] = T
            for x in T.vertices:
                self.tour_of[x] = r
        for u, v in inter:
            self.adj[u].add(v)
            self.adj[v].add(u)
        return roots

    def _scan_join(self, S):
        """Emit shift-index / update-index messages from consecutive pairs of S.

        Case 1 (fwd, fwd): shift the entered tree up to the next splice point.
        Case 2 (fwd, back): the entered tree is a leaf of T_H; shift all of it.
        Case 3 (back, fwd): shift the parent between two splice points.
        Case 4 (back, back): shift the rest of the parent after its last splice.
        Delta is always (output cursor - consumed prefix of that tree).
        """
        shifts: list[ShiftMessage] = []
        adds: list[ShiftMessage] = []
        cursor = 0
        consumed: dict[int, int] = {}
        target_of: dict[int, int] = {}
        stack: list[int] = []

        def enter(sym):
            nonlocal cursor
            u, t, b = sym
            if u is not None:
                adds.append(ShiftMessage.add(u, cursor + 1))
                adds.append(ShiftMessage.add(t, cursor + 2))
                cursor += 2
                target_of[b] = target_of[stack[-1]]
            else:
                target_of[b] = b
            consumed[b] = 0
            stack.append(b)

        def leave(sym):
            nonlocal cursor
            u, t, b = sym
            stack.pop()
            if u is not None:
                adds.append(ShiftMessage.add(t, cursor + 1))
                adds.append(ShiftMessage.add(u, cursor + 2))
                cursor += 2
            else:
                cursor = 0

        def segment(tid: int, end: int):
            nonlocal cursor
            start = consumed[tid]
            if end > start:
                shifts.append(ShiftMessage.shift(tid, start + 1, end, cursor - start, target_of[tid]))
                cursor += end - start
                consumed[tid] = end

        enter(S[0][1])
        for (k1, s1), (k2, s2) in zip(S, S[1:]):
            if k1 == "back" and s1[0] is None:
                # boundary between two merged trees: start a fresh root node
                enter(s2)
                continue
            current = stack[-1]
            if k2 == "fwd":
                # Case 1 or Case 3
                segment(current, self.splice_point(s2[0]))
                enter(s2)
            else:
                # Case 2 or Case 4
                segment(current, self.tours[current].length)
                leave(s2)
        return shifts, adds

    def batch_split(self, tree_edges: Iterable[tuple[int, int]]) -> list[int]:
        """Delete several tree edges at once; returns the ids of all resulting tours."""
        todo = [_edge(*e) for e in tree_edges]
        for u, v in todo:
            if v not in self.adj[u]:
                raise TourError(f"({u}, {v}) is not a tree edge")
        self._charge_gather(4 * len(todo))
        if not todo:
            self._charge_bcast(0)
            return []
        by_tid: dict[int, list[tuple[int, int]]] = defaultdict(list)
        for u, v in sorted(set(todo)):
            a, b = self.parent_child(u, v)
            by_tid[self.tour_of[a]].append((a, b))
        result = []
        all_drops, all_shifts = [], []
        plans = []
        for tid, pairs in sorted(by_tid.items()):
            drops, shifts, frag_root = self._scan_split(tid, pairs)
            all_drops += drops
            all_shifts += shifts
            plans.append((tid, pairs, frag_root))
        self.last_messages = all_drops + all_shifts
        self._charge_bcast(5 * len(todo) + len(by_tid))
        old_vertices = {tid: set(self.tours[tid].vertices) for tid, _, _ in plans}
        moved = self._apply(all_drops, all_shifts, [])
        for tid, pairs, frag_root in plans:
            members: dict[int, set[int]] = defaultdict(set)
            for x in old_vertices[tid]:
                if x in moved:
                    members[moved[x]].add(x)
            for a, b in pairs:
                if not self.ind[b]:
                    members[frag_root[b]].add(b)
            r = self.tours[tid].root
            if not self.ind[r]:
                members[tid].add(r)
            del self.tours[tid]
            for ftid, vs in members.items():
                root = r if ftid == tid else next(b for b, t in frag_root.items() if t == ftid)
                self.tours[ftid] = TourSummary(ftid, root, sum(len(self.ind[x]) for x in vs), vs)
                for x in vs:
                    self.tour_of[x] = ftid
                result.append(ftid)
            for a, b in pairs:
                self.adj[a].discard(b)
                self.adj[b].discard(a)
        return sorted(result)

    def _scan_split(self, tid: int, pairs: list[tuple[int, int]]):
        """Inverse of the join scan: walk removal events in index order."""
        frag_root = {b: self._fresh_tid() for _, b in pairs}
        events = []
        for a, b in pairs:
            fb, lb = self.f(b), self.l(b)
            events.append((fb - 1, "enter", a, b))
            events.append((lb, "exit", a, b))
        events.sort()
        drops, shifts = [], []
        stack = [[tid, 0]]
        seg_start = 1

        def segment(end: int):
            nonlocal seg_start
            frag = stack[-1]
            if end >= seg_start:
                shifts.append(ShiftMessage.shift(tid, seg_start, end, frag[1] - seg_start + 1, frag[0]))
                frag[1] += end - seg_start + 1

        for pos, kind, a, b in events:
            segment(pos - 1)
            if kind == "enter":
                drops.append(ShiftMessage.drop(a, pos))
                drops.append(ShiftMessage.drop(b, pos + 1))
                stack.append([frag_root[b], 0])
                seg_start = pos + 2
            else:
                drops.append(ShiftMessage.drop(b, pos))
                drops.append(ShiftMessage.drop(a, pos + 1))
                stack.pop()
                seg_start = pos + 2
        segment(self.tours[tid].length)
        return drops, shifts, frag_root

    # -- oracle comparison ----------------------------------------------------

    def dump(self) -> str:
        lines = []
        for T in sorted(self.tours.values(), key=lambda t: t.root):
            lines.append(f"tour {T.tour_id} root {T.root} L {T.length}")
            occ = sorted((i, x) for x in T.vertices for i in self.ind[x])
            lines.extend(f"occ {x} {i}" for i, x in occ)
        return "\n".join(lines) + "\n"

    def oracle(self, canonical: bool = False) -> OracleTours:
        """Oracle tours for the current forest and roots.

        By default siblings follow the order recorded in the state (ascending
        f); canonical=True uses ascending vertex ids instead.
        """
        order = None if canonical else (lambda x, kids: sorted(kids, key=self.f))
        return oracle_rebuild(range(self.n), self.edges(),
                              roots=[T.root for T in self.tours.values()], order=order)

    def oracle_dump(self, canonical: bool = False) -> str:
        ids = {T.root: T.tour_id for T in self.tours.values()}
        return self.oracle(canonical).dump(ids)

    def matches_oracle(self, canonical: bool = False) -> bool:
        return self.dump() == self.oracle_dump(canonical)

    @classmethod
    def from_forest(cls, n: int, edges: Iterable[tuple[int, int]], roots: Iterable[int] | None = None,
                    engine: MPCEngine | None = None) -> EulerForest:
        """Load the canonical oracle tours as the initial distributed state."""
        edges = [_edge(*e) for e in edges]
        ref = oracle_rebuild(range(n), edges, roots=roots)
        ef = cls(n, engine)
        for root, seq in ref.sequences.items():
            members = {x for x, r in ref.root_of.items() if r == root}
            tid = min(members)
            ef.tours.pop(tid, None)
            for x in members:
                ef.tours.pop(x, None)
                ef.tour_of[x] = tid
                ef.ind[x] = list(ref.ind[x])
            ef.tours[tid] = TourSummary(tid, root, len(seq), members)
        for u, v in edges:
            ef.adj[u].add(v)
            ef.adj[v].add(u)
        return ef
