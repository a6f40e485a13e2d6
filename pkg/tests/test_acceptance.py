"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import math
import random
import statistics

import numpy as np
import pytest

from conftest import RESULTS
from euler_driver import run_session
from mpcgraph import matching as mm
from mpcgraph import oracles
from mpcgraph.connectivity import Connectivity, default_k_max, dele, ins
from mpcgraph.harness import RunConfig, generate, run
from mpcgraph.l0_sketch import SketchParams, new_sketch, vertex_sketch
from mpcgraph.matching import DYNAMIC, INSERTION_ONLY, AKLYMatching, dynamic_batch_cap
from mpcgraph.mpc_engine import EngineConfig, MPCEngine


@pytest.fixture
def verdict(capsys):
    def emit(k: int, ok: bool, detail: str):
        line = f"CRITERION {k} {'PASS' if ok else 'FAIL'}: {detail}"
        RESULTS.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line
    return emit


def test_c01_euler_tour_exactness(verdict):
    bad = []
    for seed in range(1000):
        bad += run_session(seed, steps=12)
    verdict(1, not bad, f"{len(bad)} oracle mismatches over 1000 sessions" + (f", first {bad[0]}" if bad else ""))


def test_c02_connectivity_correctness(verdict):
    n, runs, batches, k = 256, 200, 50, 16
    queries = failures = 0
    replay_bad = 0
    for seed in range(runs):
        wl = generate("erdos-renyi-mixed", n, {}, seed=seed, batches=batches, batch_size=k)
        rep = run(wl, RunConfig(phi=0.75, seed=seed, k_max=k))
        assert rep.error is None, rep.error
        queries += len(rep.queries)
        failed = [q["batch"] for q in rep.queries if not q["ok"]]
        failures += len(failed)
        if failed:
            again = run(wl, RunConfig(phi=0.75, seed=seed + 10 ** 6, k_max=k))
            replay_bad += sum(1 for q in again.queries if q["batch"] in failed and not q["ok"])
    rate = 1 - failures / queries
    ok = rate >= 0.99 and replay_bad == 0
    verdict(2, ok, f"{queries - failures}/{queries} checkpoints correct ({rate:.4f}), "
                   f"{replay_bad} failures after fresh-seed replay")


def _rounds(n, phi, accounting, seed):
    wl = generate("erdos-renyi-mixed", n, {}, seed=seed, batches=30, batch_size=default_k_max(n, phi))
    rep = run(wl, RunConfig(phi=phi, accounting=accounting, seed=1))
    assert rep.error is None, rep.error
    return statistics.median(b["rounds"] for b in rep.batches), rep


def test_c03_round_constancy(verdict):
    medians = {n: _rounds(n, 0.5, "idealized", n)[0] for n in (64, 256, 1024, 4096)}
    spread = max(medians.values()) - min(medians.values())
    phis = (0.3, 0.5, 0.7)
    ys = np.array([_rounds(1024, phi, "strict", 3)[0] for phi in phis])
    A = np.vstack([np.ones(3), [1 / p for p in phis]]).T
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    r2 = 1 - ((ys - A @ coef) ** 2).sum() / ((ys - ys.mean()) ** 2).sum()
    ok = spread == 0 and r2 >= 0.9
    verdict(3, ok, f"idealized medians {medians} (spread {spread}); strict {dict(zip(phis, ys.tolist()))} "
                   f"fit {coef[0]:.1f} + {coef[1]:.1f}/phi, R^2 = {r2:.3f}")


def _peak(n, batches, seed=0, phi=0.5, k=None):
    k = k or default_k_max(n, phi)
    wl = generate("erdos-renyi-mixed", n, {"p_delete": 0.0}, seed=seed, batches=batches, batch_size=k)
    rep = run(wl, RunConfig(phi=phi, seed=seed, k_max=k))
    assert rep.error is None, rep.error
    return rep.summary["peak_total_memory"], sum(len(b.updates) for b in wl.batches)


def test_c04_memory_envelope(verdict):
    ratios, within = {}, True
    for n in (256, 1024, 4096):
        peak, _ = _peak(n, 20)
        within &= peak <= 64 * n * math.log2(n) ** 3
        ratios[n] = peak / (n * math.log2(n) ** 3)
    vals = list(ratios.values())
    monotone = all(a >= b for a, b in zip(vals, vals[1:]))
    p1, m1 = _peak(1024, 64, phi=0.75, k=16)
    p2, m2 = _peak(1024, 128, phi=0.75, k=16)
    change = abs(p2 - p1) / p1
    ok = within and monotone and change < 0.05 and m2 >= 2 * m1 - 2
    verdict(4, ok, "peak/(n log^3 n) " + ", ".join(f"n={n}: {r:.2f}" for n, r in ratios.items())
            + f"; m {m1} -> {m2} changes peak by {100 * change:.2f}%")


def test_c05_l0_sampler_statistics(verdict):
    trials = 10_000
    N = 2016
    rng = random.Random(5)
    parts, ok = [], True
    for delta, tag in ((0.25, "1/4"), (0.01, "1/100")):
        fails = 0
        for t in range(trials):
            sk = new_sketch(SketchParams(N, tag, seed=rng.randrange(2 ** 62)))
            support = {}
            for i in rng.sample(range(1, N + 1), rng.randint(1, 64)):
                support[i] = rng.choice([-2, -1, 1, 2])
                sk.update_inplace(i, support[i])
            got = sk.query()
            fails += got is None or got not in support
        bound = delta + 3 * math.sqrt(delta * (1 - delta) / trials)
        ok &= fails / trials <= bound
        parts.append(f"delta={delta}: {fails / trials:.4f} <= {bound:.4f}")
    zero_ok = 0
    for t in range(1000):
        sk = new_sketch(SketchParams(N, "1/4", seed=t))
        i = rng.randrange(1, N + 1)
        sk.update_inplace(i, 3)
        sk.update_inplace(i, -3)
        zero_ok += sk.query() is None
    ok &= zero_ok == 1000
    verdict(5, ok, "; ".join(parts) + f"; zero vector gave None in {zero_ok}/1000")


def test_c06_exact_msf(verdict):
    mismatches = checks = 0
    for seed in range(300):
        wl = generate("erdos-renyi-mixed", 128, {}, seed=seed, batches=12, batch_size=8, mode="msf-exact")
        rep = run(wl, RunConfig(phi=0.8, seed=seed))
        assert rep.error is None, rep.error
        checks += len(rep.queries)
        mismatches += sum(not q["ok"] for q in rep.queries)
    verdict(6, mismatches == 0, f"{mismatches} Kruskal mismatches over {checks} checkpoints in 300 runs")


def test_c07_approx_msf(verdict):
    eps = 0.1
    total = guarded = bad = 0
    worst = worst_forest = 0.0
    for seed in range(300):
        wl = generate("weight-laddered", 32, {"W": 8, "epsilon": eps}, seed=seed, batches=6, batch_size=4)
        rep = run(wl, RunConfig(phi=0.8, seed=seed))
        assert rep.error is None, rep.error
        for q in rep.queries:
            total += 1
            if not q["guard"]:
                continue
            guarded += 1
            bad += not q["ok"]
            if math.isfinite(q["ratio"]):
                worst = max(worst, q["ratio"])
                worst_forest = max(worst_forest, q["forest_ratio"])
    ok = guarded >= 0.99 * total and bad == 0
    verdict(7, ok, f"guard held at {guarded}/{total}; {bad} out-of-range; max estimate ratio {worst:.4f}, "
                   f"max forest ratio {worst_forest:.4f}")


def test_c08_bipartiteness(verdict):
    q = good = bip = 0
    for seed in range(100):
        wl = generate("erdos-renyi-mixed", 16, {"p_delete": 0.25}, seed=seed, batches=10, batch_size=3,
                      mode="bipartite")
        rep = run(wl, RunConfig(phi=0.9, seed=seed))
        assert rep.error is None, rep.error
        for x in rep.queries:
            q += 1
            good += x["ok"]
            bip += x["truth"]
    ok = q >= 1000 and good >= 0.99 * q and 0 < bip < q
    verdict(8, ok, f"{good}/{q} verdicts match ({bip} bipartite, {q - bip} with odd cycles)")


def _planted_akly(n, alpha, seed):
    rng = random.Random(seed)
    eng = MPCEngine(EngineConfig(n, 0.5))
    A = AKLYMatching(n, alpha, eng, seed=seed)
    half = n // 2
    perm = list(range(half))
    rng.shuffle(perm)
    planted = [(a, half + perm[a]) for a in range(half)]
    noise = set()
    while len(noise) < n:
        e = (rng.randrange(half), half + rng.randrange(half))
        if e not in planted:
            noise.add(e)
    ups = [ins(*e) for e in planted + sorted(noise)]
    rng.shuffle(ups)
    ups += [dele(*e) for e in rng.sample(sorted(noise), n // 2)]
    live = set()
    for i in range(0, len(ups), A.batch_cap):
        b = ups[i:i + A.batch_cap]
        A.akly_batch_update(b)
        for up in b:
            (live.add if up.op == "+" else live.discard)(up.edge)
    M = A.akly_query()
    assert oracles.is_matching(M) and set(M) <= live
    return oracles.max_matching_size(n, sorted(live)) / len(M)


def _planted_tester_trial(n, mode, trial):
    rng = random.Random(trial)
    k = rng.choice([4, 8, 16])
    big = trial % 2 == 0
    vs = rng.sample(range(n), n)
    E = set()
    if big:
        E |= {tuple(sorted((vs[2 * i], vs[2 * i + 1]))) for i in range(k)}
        for _ in range(2 * k):
            E.add(tuple(sorted(rng.sample(range(n), 2))))
    else:
        centers, leaves = vs[:rng.randint(1, k // 2)], vs[k // 2:]
        for x in leaves[:4 * k]:
            if x not in centers:
                E.add(tuple(sorted((rng.choice(centers), x))))
    E = sorted(E)
    rng.shuffle(E)
    nu = oracles.max_matching_size(n, E)
    assert nu >= k if big else nu <= k / 2
    eng = MPCEngine(EngineConfig(n, 0.5))
    T = mm.Tester(n, k, mode, eng, seed=trial)
    cap = eng.batch_cap(3) if mode == INSERTION_ONLY else dynamic_batch_cap(eng.s, 0.25)
    ups = [ins(*e) for e in E]
    if mode == DYNAMIC:
        extra = []
        while len(extra) < k:
            e = tuple(sorted(rng.sample(range(n), 2)))
            if e not in E and e not in extra:
                extra.append(e)
        ups = [ins(*e) for e in extra] + ups + [dele(*e) for e in extra]
    for i in range(0, len(ups), cap):
        mm.tester_update(T, ups[i:i + cap])
    return mm.tester_verdict(T) == big


def test_c09_matching(verdict):
    viol = checks = 0
    for alpha in (1, 2, 4, 8):
        for seed in range(5):
            wl = generate("matching-planted", 64, {"nu": 32, "stream": INSERTION_ONLY}, seed=seed, batches=16,
                          batch_size=8, mode="match-greedy")
            rep = run(wl, RunConfig(phi=0.8, seed=seed, alpha=alpha))
            assert rep.error is None, rep.error
            checks += len(rep.queries)
            viol += sum(not q["ok"] for q in rep.queries)
    part_a = viol == 0
    C = {alpha: max(_planted_akly(512, alpha, s) for s in range(3)) / alpha for alpha in (2, 4, 8)}
    part_b = max(C.values()) / min(C.values()) <= 2
    rates = {mode: sum(_planted_tester_trial(128, mode, t) for t in range(200)) / 200
             for mode in (INSERTION_ONLY, DYNAMIC)}
    part_c = all(r >= 0.9 for r in rates.values())
    verdict(9, part_a and part_b and part_c,
            f"(a) {viol} greedy violations over {checks} checkpoints; (b) C by alpha "
            + ", ".join(f"{a}: {c:.2f}" for a, c in C.items())
            + f", max/min {max(C.values()) / min(C.values()):.2f}; (c) tester accuracy "
            + ", ".join(f"{m} {r:.3f}" for m, r in rates.items()))


def test_c10_sketch_linearity(verdict):
    mismatches = cells = 0
    for seed in range(100):
        rng = random.Random(seed)
        n = rng.choice([8, 16, 32])
        eng = MPCEngine(EngineConfig(n, 0.9, local_memory_override=256, c_total=4096.0))
        conn = Connectivity(n, eng, seed=seed, k_max=4)
        live = set()
        for _ in range(15):
            batch, seen = [], set()
            for _ in range(4):
                if live and rng.random() < 0.4:
                    e = rng.choice(sorted(live))
                    if e in seen:
                        continue
                    batch.append(dele(*e))
                else:
                    e = tuple(sorted(rng.sample(range(n), 2)))
                    if e in live or e in seen:
                        continue
                    batch.append(ins(*e))
                seen.add(e)
            conn.apply_batch(batch)
            for up in batch:
                (live.add if up.op == "+" else live.discard)(up.edge)
        adj = {v: [] for v in range(n)}
        for u, v in live:
            adj[u].append(v)
            adj[v].append(u)
        for c, params in enumerate(conn.bank.params):
            for v in range(n):
                cells += 1
                mismatches += not vertex_sketch(params, n, v, adj[v]).cells_equal(conn.bank.sketch(v, c))
    verdict(10, mismatches == 0, f"{mismatches} mismatching vertex sketches out of {cells} over 100 runs")
