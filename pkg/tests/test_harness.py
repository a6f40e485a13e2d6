import json

import pytest

from mpcgraph import cli
from mpcgraph.connectivity import DELETE, INSERT
from mpcgraph.harness import (KINDS, RunConfig, WorkloadError, generate, matching_oracle, oracle_check,
                              parse_workload, run)
from mpcgraph.oracles import component_labels


@pytest.mark.parametrize("kind", KINDS)
def test_generation_is_byte_identical(kind):
    a = generate(kind, 32, {}, seed=5, batches=6, batch_size=4).dumps()
    b = generate(kind, 32, {}, seed=5, batches=6, batch_size=4).dumps()
    assert a == b
    assert parse_workload(a).dumps() == a


def test_seeds_differ():
    assert generate("erdos-renyi-mixed", 32, {}, 1).dumps() != generate("erdos-renyi-mixed", 32, {}, 2).dumps()


def test_path_splitter_deletes_tree_edges_only():
    wl = generate("path-splitter", 40, {}, seed=3, batches=30, batch_size=5)
    live = set()
    for b in wl.batches:
        for up in sorted(b.updates, key=lambda x: x.op != INSERT):
            if up.op == INSERT:
                labels = component_labels(40, live)
                assert labels[up.u] != labels[up.v]
                live.add(up.edge)
            else:
                live.discard(up.edge)
        assert sum(1 for _ in live) == 40 - len(set(component_labels(40, live)))
    assert any(up.op == DELETE for b in wl.batches for up in b.updates)


def test_planted_matching_size():
    wl = generate("matching-planted", 64, {"nu": 32}, seed=0, batches=40, batch_size=8)
    live = set()
    for b in wl.batches[:12]:
        live.update(up.edge for up in b.updates)
    assert matching_oracle(64, sorted(live)) == 32


def test_insertion_only_modes():
    wl = generate("erdos-renyi-mixed", 16, {}, seed=0, mode="match-greedy")
    assert all(up.op == INSERT for b in wl.batches for up in b.updates)
    with pytest.raises(WorkloadError):
        generate("path-splitter", 16, {}, mode="msf-exact")


@pytest.mark.parametrize("text", [
    "mode connectivity\nBATCH\n",
    "n 8\nmode nope\n",
    "n 8\nmode connectivity\nBATCH\n+ 1 1\n",
    "n 8\nmode connectivity\nBATCH\n+ 1 9\n",
    "n 8\nmode connectivity\nBATCH\n- 1 2\n",
    "n 8\nmode connectivity\nBATCH\n+ 1 2\nBATCH\n+ 2 1\n",
    "n 8\nmode msf-exact\nBATCH\n+ 1 2\n",
    "n 8\nmode msf-exact\nBATCH\n+ 1 2 3\nBATCH\n- 1 2\n",
    "n 8\nmode connectivity\nBATCH\n* 1 2\n",
    "n 8\nmode connectivity\nBATCH\n- 1 2 3\n",
    "n eight\nmode connectivity\n",
])
def test_parse_errors(text):
    with pytest.raises(WorkloadError):
        parse_workload(text)


def test_insert_then_delete_same_batch():
    wl = parse_workload("n 4\nmode connectivity\nk_max 2\nBATCH\n- 0 1\n+ 0 1\nQ\n")
    report = run(wl, RunConfig(local_memory=64))
    assert report.ok and report.queries[0]["ok"]


def test_empty_workload():
    wl = parse_workload("n 8\nmode connectivity\n")
    report = run(wl)
    assert report.ok and report.summary["batches"] == 0 and report.summary["queries"] == 0


@pytest.mark.parametrize("kind,mode", [
    ("erdos-renyi-mixed", "connectivity"), ("component-churn", "connectivity"), ("path-splitter", "connectivity"),
    ("erdos-renyi-mixed", "bipartite"), ("erdos-renyi-mixed", "msf-exact"), ("weight-laddered", "msf-approx"),
    ("matching-planted", "match-akly"), ("matching-planted", "match-greedy"), ("matching-planted", "match-size"),
])
def test_runs_pass_oracles(kind, mode):
    params = {"W": 8, "epsilon": 0.25} if mode == "msf-approx" else {}
    wl = generate(kind, 24, params, seed=1, batches=6, batch_size=3, mode=mode)
    report = run(wl, RunConfig(phi=0.9, seed=1, local_memory=256, c_total=4096.0))
    assert report.error is None
    assert report.ok, report.queries


def test_oracle_check_catches_wrong_answers():
    g = {(0, 1): None, (1, 2): None}
    assert not oracle_check("connectivity", g, ([(0, 1)], [0, 0, 0]), n=3)["ok"]
    assert oracle_check("connectivity", g, ([(0, 1), (1, 2)], [0, 0, 0]), n=3)["ok"]
    assert not oracle_check("bipartite", g, False, n=3)["ok"]
    w = {(0, 1): 1.0, (1, 2): 2.0, (0, 2): 3.0}
    assert not oracle_check("msf-exact", w, [(0, 1, 1.0), (0, 2, 3.0)], n=3)["ok"]
    assert not oracle_check("match-akly", g, [(0, 1), (1, 2)], n=3)["ok"]


def test_replay_is_deterministic():
    wl = generate("erdos-renyi-mixed", 32, {}, seed=4, batches=8, batch_size=4)
    a = run(wl, RunConfig(seed=9, local_memory=64)).jsonl()
    b = run(wl, RunConfig(seed=9, local_memory=64)).jsonl()
    assert a == b


# -- CLI ----------------------------------------------------------------------------


def test_cli_generate_and_run(tmp_path, capsys):
    wl = tmp_path / "w.txt"
    rep = tmp_path / "r.jsonl"
    assert cli.main(["generate", "--kind", "erdos-renyi-mixed", "--n", "32", "--seed", "3", "-o", str(wl)]) == 0
    assert cli.main(["run", "--workload", str(wl), "--report", str(rep), "--local-memory", "64"]) == 0
    lines = [json.loads(x) for x in rep.read_text().splitlines()]
    assert lines[-1]["type"] == "summary" and lines[-1]["failures"] == 0
    assert "max rounds/batch" in capsys.readouterr().out


def test_cli_bad_input(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("n 4\nmode connectivity\nBATCH\n- 0 1\n")
    assert cli.main(["run", "--workload", str(bad)]) == 2
    assert cli.main(["run", "--workload", str(tmp_path / "missing.txt")]) == 2
    assert cli.main(["generate", "--kind", "path-splitter", "--n", "8", "--mode", "msf-exact",
                     "-o", str(tmp_path / "x")]) == 2


def test_cli_accounting_violation(tmp_path, capsys):
    wl = tmp_path / "w.txt"
    cli.main(["generate", "--kind", "erdos-renyi-mixed", "--n", "64", "--batch-size", "8", "-o", str(wl)])
    assert cli.main(["run", "--workload", str(wl), "--local-memory", "4"]) == 3
    assert "accounting violation" in capsys.readouterr().err
