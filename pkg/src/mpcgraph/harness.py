"""Workload files, generators, oracle verification and run reports."""

from __future__ import annotations

import io
import json
import math
import random
from dataclasses import dataclass, field
from typing import Any, Sequence

from scipy.cluster.hierarchy import DisjointSet

from . import oracles
from .connectivity import DELETE, INSERT, Connectivity, Update, default_k_max
from .matching import DYNAMIC, INSERTION_ONLY, AKLYMatching, GreedyMatching, SizeEstimator
from .mpc_engine import IDEALIZED, AccountingError, EngineConfig, MPCEngine
from .msf_apps import ApproxMSF, Bipartiteness, ExactMSF, level_count, weight_level

MODES = ("connectivity", "msf-exact", "msf-approx", "bipartite", "match-greedy", "match-akly", "match-size")
KINDS = ("erdos-renyi-mixed", "path-splitter", "component-churn", "matching-planted", "weight-laddered")
DEFAULT_MODE = {
    "erdos-renyi-mixed": "connectivity",
    "path-splitter": "connectivity",
    "component-churn": "connectivity",
    "matching-planted": "match-akly",
    "weight-laddered": "msf-approx",
}
WEIGHTED = ("msf-exact", "msf-approx")
INSERT_ONLY_MODES = ("msf-exact", "match-greedy")
# checks that can only fail through a logic error, so their budget is zero
EXACT_MODES = ("msf-exact", "match-greedy")
HEADER_KEYS = {"n": int, "mode": str, "W": float, "epsilon": float, "alpha": float, "kappa": float,
               "k_max": int, "stream": str}


class WorkloadError(ValueError):
    pass


@dataclass
class Batch:
    updates: list[Update] = field(default_factory=list)
    query: bool = False


@dataclass
class Workload:
    n: int
    mode: str
    params: dict[str, Any] = field(default_factory=dict)
    batches: list[Batch] = field(default_factory=list)

    def dumps(self) -> str:
        out = io.StringIO()
        out.write("# mpcgraph workload\n")
        out.write(f"n {self.n}\nmode {self.mode}\n")
        for k in sorted(self.params):
            out.write(f"{k} {_fmt(self.params[k])}\n")
        for b in self.batches:
            out.write("BATCH\n")
            for up in b.updates:
                if up.op == INSERT and up.w is not None:
                    out.write(f"+ {up.u} {up.v} {_fmt(up.w)}\n")
                else:
                    out.write(f"{up.op} {up.u} {up.v}\n")
            if b.query:
                out.write("Q\n")
        return out.getvalue()

    def max_batch(self) -> int:
        return max((len(b.updates) for b in self.batches), default=0)


def _fmt(x) -> str:
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    return str(x)


def _number(tok: str) -> float:
    return float(int(tok)) if tok.lstrip("-").isdigit() else float(tok)


def parse_workload(text: str) -> Workload:
    header: dict[str, Any] = {}
    batches: list[Batch] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "BATCH":
            batches.append(Batch())
        elif not batches:
            if tok[0] not in HEADER_KEYS or len(tok) != 2:
                raise WorkloadError(f"line {lineno}: bad header line {raw!r}")
            try:
                header[tok[0]] = HEADER_KEYS[tok[0]](tok[1])
            except ValueError as exc:
                raise WorkloadError(f"line {lineno}: {exc}") from None
        elif tok[0] == "Q" and len(tok) == 1:
            batches[-1].query = True
        elif tok[0] in (INSERT, DELETE) and len(tok) in (3, 4):
            try:
                u, v = int(tok[1]), int(tok[2])
                w = _number(tok[3]) if len(tok) == 4 else None
            except ValueError:
                raise WorkloadError(f"line {lineno}: bad update {raw!r}") from None
            if tok[0] == DELETE and w is not None:
                raise WorkloadError(f"line {lineno}: deletions carry no weight")
            batches[-1].updates.append(Update(tok[0], u, v, w))
        else:
            raise WorkloadError(f"line {lineno}: cannot parse {raw!r}")
    if "n" not in header or "mode" not in header:
        raise WorkloadError("header needs 'n' and 'mode'")
    n, mode = header.pop("n"), header.pop("mode")
    wl = Workload(n, mode, header, batches)
    validate_workload(wl)
    return wl


def validate_workload(wl: Workload) -> None:
    if wl.mode not in MODES:
        raise WorkloadError(f"unknown mode {wl.mode!r}")
    if wl.n < 2:
        raise WorkloadError("n must be at least 2")
    live: set[tuple[int, int]] = set()
    for i, b in enumerate(wl.batches):
        # batches apply all insertions before any deletion
        inserts = [up for up in b.updates if up.op == INSERT]
        deletes = [up for up in b.updates if up.op == DELETE]
        staged = set(live)
        for up in b.updates:
            if up.u == up.v or not (0 <= up.u < wl.n and 0 <= up.v < wl.n):
                raise WorkloadError(f"batch {i}: invalid edge ({up.u}, {up.v})")
        for up in inserts:
            if up.edge in staged:
                raise WorkloadError(f"batch {i}: duplicate insert of {up.edge}")
            if wl.mode in WEIGHTED and up.w is None:
                raise WorkloadError(f"batch {i}: weighted mode needs a weight on {up.edge}")
            staged.add(up.edge)
        if deletes and wl.mode in INSERT_ONLY_MODES:
            raise WorkloadError(f"batch {i}: mode {wl.mode} is insertion-only")
        for up in deletes:
            if up.edge not in staged:
                raise WorkloadError(f"batch {i}: delete of absent edge {up.edge}")
            staged.discard(up.edge)
        live = staged


def load_workload(path: str) -> Workload:
    with open(path) as fh:
        return parse_workload(fh.read())


# -- generators -------------------------------------------------------------------


def _pairs(rng: random.Random, n: int, live: set, count: int, ok=lambda u, v: True) -> list[tuple[int, int]]:
    out = []
    tries = 0
    while len(out) < count and tries < 50 * count + 100:
        tries += 1
        u, v = sorted(rng.sample(range(n), 2))
        if (u, v) not in live and ok(u, v):
            live.add((u, v))
            out.append((u, v))
    return out


def _gen_erdos_renyi(rng, n, batches, size, params):
    live: set = set()
    p_delete = 0.0 if params.get("stream") == INSERTION_ONLY else params.get("p_delete", 0.35)
    out = []
    for _ in range(batches):
        ups = []
        staged = set(live)
        old = sorted(live)
        rng.shuffle(old)
        for _ in range(size):
            if old and rng.random() < p_delete:
                e = old.pop()
                staged.discard(e)
                ups.append(Update(DELETE, *e))
            else:
                got = _pairs(rng, n, staged | set(live), 1)
                staged.update(got)
                ups.extend(Update(INSERT, *e) for e in got)
        live = staged
        out.append(Batch(ups, True))
    return out


def _gen_path_splitter(rng, n, batches, size, params):
    """The graph stays a forest; deletions always cut a current tree edge."""
    out = []
    order = list(range(n))
    rng.shuffle(order)
    path = [tuple(sorted((order[i], order[i + 1]))) for i in range(n - 1)]
    live: set = set()
    for _ in range(batches):
        ups = []
        ds = DisjointSet(range(n))
        staged = set(live)
        touched: set = set()
        for e in staged:
            ds.merge(*e)
        while len(ups) < size:
            todo = [e for e in path if e not in staged and e not in touched]
            if todo and (not staged or rng.random() < 0.5):
                e = todo[0]
                if ds.connected(*e):
                    break
                ds.merge(*e)
                staged.add(e)
                touched.add(e)
                ups.append(Update(INSERT, *e))
            elif staged - touched:
                e = rng.choice(sorted(staged - touched))
                touched.add(e)
                staged.discard(e)
                ups.append(Update(DELETE, *e))
                # re-derive connectivity after the cut
                ds = DisjointSet(range(n))
                for f in staged:
                    ds.merge(*f)
            else:
                break
        live = staged
        out.append(Batch(ups, True))
    return out


def _gen_component_churn(rng, n, batches, size, params):
    """Dense clusters linked by bridges; batches alternate cutting and re-linking bridges."""
    clusters = max(2, int(params.get("clusters", 4)))
    members = [list(range(c, n, clusters)) for c in range(clusters)]
    intra = []
    for m in members:
        for i in range(1, len(m)):
            intra.append(tuple(sorted((m[i], m[rng.randrange(i)]))))
        for _ in range(len(m)):
            if len(m) > 2:
                a, b = rng.sample(m, 2)
                e = tuple(sorted((a, b)))
                if e not in intra:
                    intra.append(e)
    out = []
    live: set = set()
    pending = list(intra)
    bridges: list = []
    cut = True
    for _ in range(batches):
        ups = []
        if pending:
            take, pending = pending[:size], pending[size:]
            ups = [Update(INSERT, *e) for e in take]
            live.update(take)
        else:
            if cut and bridges:
                k = min(size, len(bridges))
                for e in bridges[:k]:
                    ups.append(Update(DELETE, *e))
                    live.discard(e)
                bridges = bridges[k:]
            else:
                while len(ups) < size:
                    a, b = rng.sample(range(clusters), 2)
                    e = tuple(sorted((rng.choice(members[a]), rng.choice(members[b]))))
                    if e in live:
                        continue
                    live.add(e)
                    bridges.append(e)
                    ups.append(Update(INSERT, *e))
            cut = not cut
        out.append(Batch(ups, True))
    return out


def _gen_matching_planted(rng, n, batches, size, params):
    """Bipartite graph with a planted matching of size nu.

    Noise edges all have their left end among the planted left vertices, which
    then form a vertex cover of size nu, so the maximum matching is exactly nu.
    """
    half = n // 2
    nu = int(params.get("nu", half))
    if not 1 <= nu <= half:
        raise WorkloadError(f"planted nu={nu} must lie in [1, {half}]")
    right = list(range(half, 2 * half))
    rng.shuffle(right)
    planted = [(a, right[a]) for a in range(nu)]
    live = set(planted)
    noise_count = int(params.get("noise", 2 * nu))
    noise = []
    while len(noise) < noise_count and len(live) < nu * half:
        e = (rng.randrange(nu), half + rng.randrange(half))
        if e not in live:
            live.add(e)
            noise.append(e)
    stream = [Update(INSERT, *e) for e in planted + noise]
    rng.shuffle(stream)
    insert_only = params.get("stream") == INSERTION_ONLY
    out = []
    cur: set = set()
    k = 0
    for _ in range(batches):
        ups = stream[k:k + size]
        k += len(ups)
        if not ups and not insert_only:
            removable = sorted(e for e in cur if e not in set(planted))
            take = rng.sample(removable, min(size, len(removable)))
            ups = [Update(DELETE, *e) for e in take]
        for up in ups:
            (cur.add if up.op == INSERT else cur.discard)(up.edge)
        out.append(Batch(ups, True))
    return out


def _gen_weight_laddered(rng, n, batches, size, params):
    W = float(params.get("W", 64))
    eps = float(params.get("epsilon", 0.1))
    insert_only = params.get("stream") == INSERTION_ONLY
    t = level_count(W, eps)
    ladder = sorted({min(W, round((1 + eps) ** i, 6)) for i in range(t + 1)} | {1.0, W})

    def weight():
        if rng.random() < 0.5:
            return rng.choice(ladder)
        return float(rng.randint(1, int(W)))

    out = []
    live: set = set()
    for _ in range(batches):
        ups = []
        staged = set(live)
        old = sorted(live)
        rng.shuffle(old)
        for _ in range(size):
            if not insert_only and old and rng.random() < 0.3:
                e = old.pop()
                staged.discard(e)
                ups.append(Update(DELETE, *e))
            else:
                for e in _pairs(rng, n, staged | set(live), 1):
                    staged.add(e)
                    ups.append(Update(INSERT, e[0], e[1], weight()))
        live = staged
        out.append(Batch(ups, True))
    return out


GENERATORS = {
    "erdos-renyi-mixed": _gen_erdos_renyi,
    "path-splitter": _gen_path_splitter,
    "component-churn": _gen_component_churn,
    "matching-planted": _gen_matching_planted,
    "weight-laddered": _gen_weight_laddered,
}


def generate(kind: str, n: int, params: dict | None = None, seed: int = 0, *, batches: int = 10,
             batch_size: int = 4, mode: str | None = None) -> Workload:
    if kind not in GENERATORS:
        raise WorkloadError(f"unknown generator kind {kind!r}")
    if n < 4 or batches < 0 or batch_size < 1:
        raise WorkloadError("need n >= 4, batches >= 0 and batch size >= 1")
    params = dict(params or {})
    mode = mode or DEFAULT_MODE[kind]
    if mode in INSERT_ONLY_MODES:
        params.setdefault("stream", INSERTION_ONLY)
    if mode in INSERT_ONLY_MODES and kind in ("path-splitter", "component-churn"):
        raise WorkloadError(f"kind {kind} needs deletions; mode {mode} is insertion-only")
    if kind == "weight-laddered":
        params.setdefault("W", 64.0)
        params.setdefault("epsilon", 0.1)
    rng = random.Random(seed)
    body = GENERATORS[kind](rng, n, batches, batch_size, params)
    if mode in WEIGHTED and kind != "weight-laddered":
        for b in body:
            b.updates = [Update(up.op, up.u, up.v, float(rng.randint(1, 16)) if up.op == INSERT else None)
                         for up in b.updates]
        params.setdefault("W", 16.0)
    header = {k: params[k] for k in ("W", "epsilon", "alpha", "kappa", "stream") if k in params}
    header["k_max"] = max(batch_size, 1)
    wl = Workload(n, mode, header, body)
    validate_workload(wl)
    return wl


# -- oracle checks ------------------------------------------------------------------


def oracle_check(mode: str, graph, answer, **params) -> dict:
    """Compare an answer with the oracle computed from the materialized graph.

    graph is a dict edge -> weight (None when unweighted).  Returns a dict
    with at least 'ok'; guarded checks also report 'guard'.
    """
    n = params["n"]
    edges = sorted(graph)
    if mode == "connectivity":
        forest, labels = answer
        ok = oracles.is_spanning_forest(n, edges, forest) and list(labels) == oracles.component_labels(n, edges)
        return {"ok": ok}
    if mode == "msf-exact":
        ref = sorted(oracles.kruskal(n, [(u, v, w) for (u, v), w in graph.items()]))
        return {"ok": sorted(answer) == ref, "weight": sum(w for *_, w in ref)}
    if mode == "msf-approx":
        eps, W = params["epsilon"], params["W"]
        estimate, forest, counts = answer
        t = level_count(W, eps)
        ref_counts = [oracles.count_components(n, [e for e, w in graph.items() if weight_level(w, eps) <= i])
                      for i in range(t + 1)]
        K = sum(w for *_, w in oracles.kruskal(n, [(u, v, w) for (u, v), w in graph.items()]))
        guard = list(counts) == ref_counts
        fw = sum(w for *_, w in forest)
        spanning = oracles.is_spanning_forest(n, edges, [(u, v) for u, v, _ in forest])
        if K == 0:
            # the telescoping sum leaves float residue on an empty graph
            ratio = f_ratio = 1.0 if abs(estimate) <= 1e-9 * n and fw == 0 else math.inf
        else:
            ratio, f_ratio = estimate / K, fw / K
        ok = 1 - 1e-9 <= ratio <= 1 + eps + 1e-9 and spanning and f_ratio <= 1 + eps + 1e-9
        return {"ok": ok, "guard": guard, "ratio": ratio, "forest_ratio": f_ratio, "kruskal": K}
    if mode == "bipartite":
        truth = oracles.is_bipartite(n, edges)
        return {"ok": bool(answer) == truth, "truth": truth}
    nu = matching_oracle(n, edges)
    if mode == "match-greedy":
        M, cap = answer
        valid = oracles.is_matching(M) and all(tuple(sorted(e)) in graph for e in M)
        return {"ok": valid and 2 * len(M) >= min(2 * cap, nu), "nu": nu, "size": len(M)}
    if mode == "match-akly":
        M = answer
        valid = oracles.is_matching(M) and all(tuple(sorted(e)) in graph for e in M)
        ratio = nu / len(M) if M else (1.0 if nu == 0 else math.inf)
        return {"ok": valid, "nu": nu, "size": len(M), "ratio": ratio}
    if mode == "match-size":
        est = answer
        ratio = max(nu, 1) / max(est, 1) if nu or est else 1.0
        return {"ok": est <= max(1, 2 * nu) or nu == 0 and est == 0, "nu": nu, "estimate": est, "ratio": ratio}
    raise WorkloadError(f"unknown mode {mode!r}")


def matching_oracle(n: int, edges: Sequence[tuple[int, int]]) -> int:
    """Exact nu: augmenting paths on bipartite graphs, exhaustive search for n <= 24, blossom otherwise."""
    if oracles.is_bipartite(n, edges):
        return oracles.max_matching_size(n, edges)
    if n <= 24:
        return oracles.max_matching_exhaustive(n, edges)
    return oracles.max_matching_size(n, edges)


# -- run ----------------------------------------------------------------------------


@dataclass
class RunConfig:
    phi: float = 0.5
    accounting: str = IDEALIZED
    seed: int = 0
    epsilon: float | None = None
    alpha: float | None = None
    kappa: float | None = None
    oracle: bool = True
    k_max: int | None = None
    c_total: float = 64.0
    local_memory: int | None = None
    failure_budget: float = 0.01


@dataclass
class RunReport:
    mode: str
    n: int
    batches: list[dict] = field(default_factory=list)
    queries: list[dict] = field(default_factory=list)
    error: dict | None = None
    summary: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None and self.summary.get("within_budget", True)

    def jsonl(self) -> str:
        lines = [json.dumps({"type": "batch", **b}, sort_keys=True) for b in self.batches]
        lines += [json.dumps({"type": "query", **q}, sort_keys=True) for q in self.queries]
        if self.error:
            lines.append(json.dumps({"type": "error", **self.error}, sort_keys=True))
        lines.append(json.dumps({"type": "summary", **self.summary}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        s = self.summary
        rows = [("mode", self.mode), ("n", self.n), ("batches", s.get("batches", 0)),
                ("queries", s.get("queries", 0)), ("max rounds/batch", s.get("max_rounds", 0)),
                ("peak machine words", s.get("peak_machine_memory", 0)),
                ("peak total words", s.get("peak_total_memory", 0)),
                ("failures", f"{s.get('failures', 0)} (allowed {s.get('allowed_failures', 0)})")]
        if "max_ratio" in s:
            rows.append(("max ratio", f"{s['max_ratio']:.4f}"))
        if self.error:
            rows.append(("error", f"{self.error['primitive']} at batch {self.error['batch_index']}"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"


def _param(name, config, wl, default):
    v = getattr(config, name, None)
    if v is None:
        v = wl.params.get(name)
    return default if v is None else v


def build(wl: Workload, config: RunConfig):
    """Construct the engine and the algorithm object for a workload mode."""
    n, mode = wl.n, wl.mode
    eps = float(_param("epsilon", config, wl, 0.1))
    alpha = float(_param("alpha", config, wl, 2.0))
    kappa = float(_param("kappa", config, wl, 0.25))
    W = float(wl.params.get("W", 1.0))
    c_total = config.c_total
    if mode == "msf-approx":
        c_total *= level_count(W, eps) + 1
    elif mode == "bipartite":
        c_total *= 4
    engine = MPCEngine(EngineConfig(n, config.phi, config.accounting, config.seed, c_total=c_total,
                                    local_memory_override=config.local_memory))
    k_max = config.k_max or wl.params.get("k_max") or default_k_max(n, config.phi)
    seed = config.seed
    if mode == "connectivity":
        algo = Connectivity(n, engine, seed=seed, k_max=k_max)
    elif mode == "msf-exact":
        algo = ExactMSF(n, engine, k_max=k_max)
    elif mode == "msf-approx":
        algo = ApproxMSF(n, W, eps, engine, seed=seed, k_max=k_max)
    elif mode == "bipartite":
        algo = Bipartiteness(n, engine, seed=seed, k_max=k_max)
    elif mode == "match-greedy":
        algo = GreedyMatching(n, alpha, engine)
    elif mode == "match-akly":
        algo = AKLYMatching(n, alpha, engine, seed=seed, kappa=kappa)
    else:
        stream = wl.params.get("stream")
        if stream is None:
            stream = DYNAMIC if any(up.op == DELETE for b in wl.batches for up in b.updates) else INSERTION_ONLY
        algo = SizeEstimator(n, alpha, stream, engine, seed=seed, kappa=kappa)
    return engine, algo, {"n": n, "epsilon": eps, "alpha": alpha, "W": W}


def _apply(mode: str, algo, updates: list[Update]) -> None:
    if mode in ("connectivity", "msf-approx", "bipartite"):
        algo.apply_batch(updates)
    elif mode == "msf-exact":
        algo.msf_batch_insert(updates)
    elif mode == "match-greedy":
        algo.greedy_batch_insert(updates)
    elif mode == "match-akly":
        algo.akly_batch_update(updates)
    else:
        algo.update(updates)


def _answer(mode: str, algo):
    if mode == "connectivity":
        return algo.query(), algo.component_ids()
    if mode == "msf-exact":
        return algo.forest_edges()
    if mode == "msf-approx":
        return algo.msf_weight_approx(), algo.msf_forest_approx(), algo.counts()
    if mode == "bipartite":
        return algo.bipartite_query()
    if mode == "match-greedy":
        return algo.edges(), algo.cap
    if mode == "match-akly":
        return algo.akly_query()
    return algo.size_estimate()


def run(wl: Workload, config: RunConfig | None = None) -> RunReport:
    config = config or RunConfig()
    report = RunReport(wl.mode, wl.n)
    engine, algo, params = build(wl, config)
    graph: dict[tuple[int, int], float | None] = {}
    failures = guarded = 0
    ratios = []
    try:
        for i, b in enumerate(wl.batches):
            engine.begin_batch()
            _apply(wl.mode, algo, b.updates)
            stats = engine.end_batch()
            report.batches.append(stats.record(i))
            for up in sorted(b.updates, key=lambda x: x.op != INSERT):
                if up.op == INSERT:
                    graph[up.edge] = up.w
                else:
                    del graph[up.edge]
            if not b.query:
                continue
            answer = _answer(wl.mode, algo)
            q = {"batch": i}
            if config.oracle:
                verdict = oracle_check(wl.mode, graph, answer, **params)
                if verdict.get("guard", True) is False:
                    guarded += 1
                elif not verdict["ok"]:
                    failures += 1
                if "ratio" in verdict and math.isfinite(verdict["ratio"]):
                    ratios.append(verdict["ratio"])
                q.update(verdict)
            report.queries.append(q)
    except AccountingError as exc:
        exc.batch_index = engine.batch_index
        report.error = exc.as_record()
    allowed = 0 if wl.mode in EXACT_MODES else math.ceil(config.failure_budget * len(report.queries))
    report.summary = {
        "batches": len(report.batches),
        "queries": len(report.queries),
        "max_rounds": max((b["rounds"] for b in report.batches), default=0),
        "peak_machine_memory": engine.total.peak_machine_memory,
        "peak_total_memory": engine.total.peak_total_memory,
        "total_rounds": engine.total.rounds,
        "failures": failures,
        "guard_misses": guarded,
        "allowed_failures": allowed,
        "within_budget": failures + guarded <= allowed,
        "local_memory": engine.s,
        "total_budget": engine.config.total_budget,
    }
    if ratios:
        report.summary["max_ratio"] = max(ratios)
    if hasattr(algo, "sketch_failures"):
        report.summary["sketch_failures"] = algo.sketch_failures
    return report
