import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpcgraph import oracles
from mpcgraph.connectivity import (Connectivity, DuplicateEdgeError, GraphUpdateError, MissingEdgeError,
                                   default_k_max, dele, ins)
from mpcgraph.mpc_engine import BatchSizeError, EngineConfig, MPCEngine


def conn(n, mode="batch", k_max=16, phi=0.8, seed=0):
    # small test graphs get a roomier machine than n^phi would give
    eng = MPCEngine(EngineConfig(n, phi, local_memory_override=64))
    return Connectivity(n, eng, mode=mode, seed=seed, k_max=k_max)


def consistent(c, live):
    return (oracles.is_spanning_forest(c.n, live, c.query())
            and c.component_ids() == oracles.component_labels(c.n, live))


def test_single_insert_labels():
    c = conn(4, "single")
    c.insert(0, 1)
    assert c.query() == [(0, 1)] and c.C[:2] == [0, 0]
    c.insert(1, 2)
    c.insert(0, 2)
    assert c.component_ids()[:3] == [0, 0, 0] and len(c.query()) == 2
    with pytest.raises(DuplicateEdgeError):
        c.insert(0, 1)


def test_single_delete_with_replacement():
    c = conn(3, "single")
    for u, v in [(0, 1), (1, 2), (0, 2)]:
        c.insert(u, v)
    tree = sorted(c.query())
    c.delete(*tree[0])
    live = {(0, 1), (1, 2), (0, 2)} - {tree[0]}
    assert c.count_components() == 1 and consistent(c, live)


def test_single_delete_without_replacement():
    c = conn(3, "single")
    c.insert(0, 1)
    c.insert(1, 2)
    c.delete(1, 2)
    assert c.C == [0, 0, 2]
    with pytest.raises(MissingEdgeError):
        c.delete(1, 2)


def test_single_non_tree_delete():
    c = conn(3, "single")
    for u, v in [(0, 1), (1, 2), (0, 2)]:
        c.insert(u, v)
    non_tree = ({(0, 1), (1, 2), (0, 2)} - set(c.query())).pop()
    forest = c.query()
    c.delete(*non_tree)
    assert c.query() == forest


def test_single_mode_random_stream():
    rng = random.Random(2)
    n = 24
    c = conn(n, "single")
    live = set()
    for _ in range(150):
        if live and rng.random() < 0.4:
            e = rng.choice(sorted(live))
            c.delete(*e)
            live.discard(e)
        else:
            u, v = sorted(rng.sample(range(n), 2))
            if (u, v) in live:
                continue
            c.insert(u, v)
            live.add((u, v))
    assert consistent(c, live)


def test_empty_graph():
    c = conn(7)
    assert c.query() == [] and c.count_components() == 7


def test_batch_intra_component_keeps_forest():
    c = conn(6)
    c.apply_batch([ins(0, 1), ins(1, 2)])
    forest = c.query()
    c.apply_batch([ins(0, 2)])
    assert c.query() == forest


def test_batch_path_of_five():
    c = conn(5)
    c.apply_batch([ins(i, i + 1) for i in range(4)])
    assert sorted(c.query()) == [(i, i + 1) for i in range(4)] and c.count_components() == 1


def test_delete_triangle_in_one_batch():
    c = conn(6)
    c.apply_batch([ins(0, 1), ins(1, 2), ins(0, 2)])
    c.apply_batch([dele(0, 1), dele(1, 2), dele(0, 2)])
    assert c.count_components() == 6 and c.query() == []


def test_delete_tree_edge_dense_graph():
    rng = random.Random(0)
    n = 20
    c = conn(n)
    edges = sorted({tuple(sorted(rng.sample(range(n), 2))) for _ in range(80)})
    for i in range(0, len(edges), 16):
        c.apply_batch([ins(*e) for e in edges[i:i + 16]])
    e = c.query()[0]
    c.apply_batch([dele(*e)])
    live = set(edges) - {e}
    assert consistent(c, live) and c.count_components() == oracles.count_components(n, live)


def test_insert_then_delete_same_batch_is_legal():
    c = conn(4)
    c.apply_batch([dele(0, 1), ins(0, 1)])
    assert c.query() == [] and c.count_components() == 4


def test_batch_errors():
    c = conn(6, k_max=2)
    with pytest.raises(BatchSizeError):
        c.apply_batch([ins(0, 1), ins(1, 2), ins(2, 3)])
    with pytest.raises(MissingEdgeError):
        c.apply_batch([dele(0, 1)])
    c.apply_batch([ins(0, 1)])
    with pytest.raises(DuplicateEdgeError):
        c.apply_batch([ins(1, 0)])
    with pytest.raises(GraphUpdateError):
        c.apply_batch([ins(2, 2)])


def test_default_k_max_formula():
    assert default_k_max(4096, 0.5) == 1
    assert default_k_max(2 ** 20, 0.9) == max(1, -(-int(2 ** 18) // (8 * 8000)))


@pytest.mark.parametrize("seed", range(8))
def test_mixed_batches_against_union_find(seed):
    rng = random.Random(seed)
    n = 64
    c = conn(n, seed=seed)
    live = set()
    good = 0
    for _ in range(25):
        batch, staged = [], set(live)
        old = sorted(live)
        rng.shuffle(old)
        for _ in range(rng.randint(1, 16)):
            if old and rng.random() < 0.4:
                e = old.pop()
                staged.discard(e)
                batch.append(dele(*e))
            else:
                u, v = sorted(rng.sample(range(n), 2))
                if (u, v) in staged or (u, v) in live:
                    continue
                staged.add((u, v))
                batch.append(ins(u, v))
        c.apply_batch(batch)
        live = staged
        good += consistent(c, live)
        assert c.forest.matches_oracle()
        assert all(c.C[x] == min(T.vertices) for T in c.forest.tours.values() for x in T.vertices)
    assert good >= 24
    assert c.rebuilt_bank().equals(c.bank)


def test_memory_envelope_and_history():
    n = 128
    eng = MPCEngine(EngineConfig(n, 0.8))
    c = Connectivity(n, eng, k_max=16)
    rng = random.Random(1)
    for _ in range(10):
        eng.begin_batch()
        batch = []
        for _ in range(8):
            u, v = sorted(rng.sample(range(n), 2))
            if (u, v) not in c.edges and all(b.edge != (u, v) for b in batch):
                batch.append(ins(u, v))
        c.apply_batch(batch)
        eng.end_batch()
    assert eng.total.peak_total_memory <= eng.config.total_budget
    assert len(eng.history) == 10


def test_fixed_schedule_rounds():
    """Idealized rounds per batch do not depend on what the batch contains."""
    rng = random.Random(5)
    n = 64
    eng = MPCEngine(EngineConfig(n, 0.8, local_memory_override=64))
    c = Connectivity(n, eng, k_max=8)
    live = set()
    rounds = []
    for i in range(30):
        eng.begin_batch()
        if i % 3 == 2 and live:
            e = rng.choice(sorted(live))
            live.discard(e)
            c.apply_batch([dele(*e)])
        else:
            u, v = sorted(rng.sample(range(n), 2))
            if (u, v) in live:
                c.apply_batch([])
            else:
                live.add((u, v))
                c.apply_batch([ins(u, v)])
        rounds.append(eng.end_batch().rounds)
    assert len(set(rounds)) == 1


@settings(max_examples=15, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), min_size=1, max_size=40), st.integers(0, 99))
def test_property_stream(pairs, seed):
    n = 12
    c = conn(n, k_max=4, seed=seed)
    live = set()
    for u, v in pairs:
        if u == v:
            continue
        e = (min(u, v), max(u, v))
        if e in live:
            c.apply_batch([dele(*e)])
            live.discard(e)
        else:
            c.apply_batch([ins(*e)])
            live.add(e)
        assert c.forest.matches_oracle()
    assert c.count_components() == oracles.count_components(n, live) or c.stats["sketch_failures"] > 0
