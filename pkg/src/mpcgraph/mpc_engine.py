"""Cost simulator for the sublinear-memory MPC model.

Algorithms call bulk primitives; the engine runs them in-process and charges
rounds, per-machine memory and communication in words.  Every primitive
validates its inputs against the caps before touching any state.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import reduce
from typing import Any, Callable, Hashable, Iterable, Sequence

IDEALIZED = "idealized"
STRICT = "strict"
STRICT_SORT_ROUNDS = 3


class AccountingError(RuntimeError):
    """A primitive would break a memory, communication or batch-size cap."""

    def __init__(self, primitive: str, detail: str, *, machine: int | None = None,
                 words: int | None = None, cap: int | None = None):
        self.primitive = primitive
        self.detail = detail
        self.machine = machine
        self.words = words
        self.cap = cap
        self.batch_index: int | None = None
        super().__init__(f"{primitive}: {detail}")

    def as_record(self) -> dict:
        return {"error": type(self).__name__, "primitive": self.primitive, "detail": self.detail,
                "machine": self.machine, "words": self.words, "cap": self.cap,
                "batch_index": self.batch_index}


class MemoryCapError(AccountingError):
    pass


class BudgetError(AccountingError):
    pass


class BatchSizeError(AccountingError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    n: int
    phi: float
    accounting: str = IDEALIZED
    seed: int = 0
    c_total: float = 64.0
    machines: int | None = None
    local_memory_override: int | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("the engine needs n >= 2")
        if not 0 < self.phi < 1:
            raise ValueError("phi must lie in (0, 1)")
        if self.accounting not in (IDEALIZED, STRICT):
            raise ValueError(f"unknown accounting mode {self.accounting!r}")
        if self.local_memory < 2:
            raise ValueError("local memory must be at least 2 words")

    @property
    def local_memory(self) -> int:
        if self.local_memory_override is not None:
            return int(self.local_memory_override)
        return math.ceil(self.n ** self.phi - 1e-9)

    @property
    def total_budget(self) -> int:
        return math.ceil(self.c_total * self.n * math.log2(self.n) ** 3)

    @property
    def num_machines(self) -> int:
        if self.machines is not None:
            return int(self.machines)
        return math.ceil(self.total_budget / self.local_memory)


@dataclass
class RoundStats:
    rounds: int = 0
    peak_machine_memory: int = 0
    total_communication: int = 0
    broadcasts: int = 0
    peak_total_memory: int = 0

    def record(self, batch_index: int) -> dict:
        return {"batch_index": batch_index, **asdict(self)}

    def to_json(self, batch_index: int) -> str:
        return json.dumps(self.record(batch_index), sort_keys=True)


def ceil_log(count: int, base: int) -> int:
    """Smallest d with base^d >= count (0 for count <= 1), exact in integers."""
    d, reach = 0, 1
    while reach < count:
        reach *= base
        d += 1
    return d


@dataclass
class Partition:
    """Vertex-keyed records laid out on consecutive machines."""

    machines: list[list[tuple[Hashable, Any]]] = field(default_factory=list)
    loads: list[int] = field(default_factory=list)

    @classmethod
    def by_vertex(cls, records: Iterable[tuple[Hashable, Any]], s: int, width: int = 1) -> Partition:
        if width > s:
            raise MemoryCapError("partition", f"record of {width} words exceeds local memory", words=width, cap=s)
        part = cls()
        for key, rec in sorted(records, key=lambda kv: kv[0]):
            if not part.machines or part.loads[-1] + width > s:
                part.machines.append([])
                part.loads.append(0)
            part.machines[-1].append((key, rec))
            part.loads[-1] += width
        return part


class MPCEngine:
    def __init__(self, config: EngineConfig):
        self.config = config
        self.s = config.local_memory
        self.total = RoundStats()
        self.batch = RoundStats()
        self.batch_index = 0
        self.history: list[dict] = []
        self.resident: dict[str, int] = {}
        self._resident_total = 0

    # -- bookkeeping --------------------------------------------------------

    @property
    def strict(self) -> bool:
        return self.config.accounting == STRICT

    def _charge(self, rounds: int = 0, comm: int = 0, load: int = 0, broadcasts: int = 0) -> None:
        for st in (self.total, self.batch):
            st.rounds += rounds
            st.total_communication += comm
            st.broadcasts += broadcasts
            st.peak_machine_memory = max(st.peak_machine_memory, load)

    def _check_load(self, primitive: str, words: int, machine: int | None = None) -> None:
        if words > self.s:
            raise MemoryCapError(primitive, f"{words} words exceed local memory {self.s}",
                                 machine=machine, words=words, cap=self.s)

    def begin_batch(self) -> None:
        self.batch = RoundStats(peak_total_memory=self._resident_total)

    def end_batch(self) -> RoundStats:
        done = self.batch
        self.history.append(done.record(self.batch_index))
        self.batch_index += 1
        self.begin_batch()
        return done

    def allocate(self, name: str, words: int) -> None:
        """Set the resident size of a named structure (replaces its old size)."""
        new_total = self._resident_total - self.resident.get(name, 0) + int(words)
        if new_total > self.config.total_budget:
            raise BudgetError("allocate", f"{name}: resident {new_total} words exceed budget "
                              f"{self.config.total_budget}", words=new_total, cap=self.config.total_budget)
        self.resident[name] = int(words)
        self._resident_total = new_total
        for st in (self.total, self.batch):
            st.peak_total_memory = max(st.peak_total_memory, new_total)

    def release(self, name: str) -> None:
        self._resident_total -= self.resident.pop(name, 0)

    @property
    def resident_words(self) -> int:
        return self._resident_total

    # -- primitives ---------------------------------------------------------

    def broadcast_rounds(self) -> int:
        if not self.strict:
            return 1
        return max(1, ceil_log(self.config.num_machines, self.s))

    def broadcast(self, payload_words: int) -> int:
        payload_words = int(payload_words)
        self._check_load("broadcast", payload_words)
        r = self.broadcast_rounds()
        self._charge(rounds=r, comm=payload_words * self.config.num_machines, load=payload_words, broadcasts=1)
        return r

    def disseminate(self, words: int) -> int:
        """Deliver a payload of any size to every machine in waves of at most s words."""
        words = int(words)
        waves = max(1, -(-words // self.s))
        r = 0
        for k in range(waves):
            r += self.broadcast(min(self.s, words - k * self.s))
        return r

    def gather(self, words: int) -> int:
        """Collect small per-machine contributions on one coordinator machine."""
        words = int(words)
        waves = max(1, -(-words // self.s))
        self._charge(rounds=waves, comm=words, load=min(self.s, words))
        return waves

    def bulk_sort(self, records: Sequence, key: Callable | None = None, width: int = 1) -> list:
        words = len(records) * width
        if words > self.config.total_budget:
            raise BudgetError("bulk_sort", f"{words} words exceed total budget", words=words,
                              cap=self.config.total_budget)
        self._check_load("bulk_sort", width)
        out = sorted(records, key=key)
        r = STRICT_SORT_ROUNDS if self.strict else 1
        self._charge(rounds=r, comm=words, load=min(self.s, words))
        return out

    def aggregate_rounds(self, count: int, chunk: int) -> int:
        self._check_load("tree_aggregate", chunk)
        fan_in = self.s // max(1, chunk)
        if count > 1 and fan_in < 2:
            raise MemoryCapError("tree_aggregate", f"chunk of {chunk} words leaves fan-in {fan_in}",
                                 words=2 * chunk, cap=self.s)
        if not self.strict:
            return 1
        return max(1, ceil_log(count, fan_in))

    def tree_aggregate(self, values: Sequence, op: Callable[[Any, Any], Any], chunk: int = 1):
        """Fold values up a tree of fan-in floor(s/chunk)."""
        count = len(values)
        if count == 0:
            raise ValueError("tree_aggregate needs at least one value")
        r = self.aggregate_rounds(count, chunk)
        fan_in = max(2, self.s // max(1, chunk))
        level = list(values)
        comm = 0
        while len(level) > 1:
            nxt = []
            for lo in range(0, len(level), fan_in):
                group = level[lo:lo + fan_in]
                comm += (len(group) - 1) * chunk
                nxt.append(reduce(op, group))
            level = nxt
        self._charge(rounds=r, comm=comm, load=min(count, fan_in) * chunk)
        return level[0]

    def charge_aggregate(self, count: int, chunk: int, parallel: int = 1) -> int:
        """Charge a tree aggregation computed elsewhere (e.g. sliced sketch merges)."""
        r = self.aggregate_rounds(max(1, count), chunk)
        fan_in = max(2, self.s // max(1, chunk))
        self._charge(rounds=r, comm=max(0, count - 1) * chunk * parallel,
                     load=min(max(1, count), fan_in) * chunk)
        return r

    def map_over_partition(self, partition: Partition | Sequence[Sequence],
                           step: Callable[[int, Sequence], Sequence[tuple[Any, int]]]) -> list:
        """Run step on every machine; step returns (message, words) pairs.

        Caps are checked for all machines before any output is delivered.
        """
        machines = partition.machines if isinstance(partition, Partition) else partition
        outputs = []
        for mid, local in enumerate(machines):
            msgs = list(step(mid, local))
            sent = sum(w for _, w in msgs)
            if sent > self.s:
                raise MemoryCapError("map_over_partition", f"machine {mid} emitted {sent} words",
                                     machine=mid, words=sent, cap=self.s)
            outputs.append(msgs)
        comm = sum(w for msgs in outputs for _, w in msgs)
        peak = max([sum(w for _, w in msgs) for msgs in outputs], default=0)
        self._charge(rounds=1, comm=comm, load=peak)
        return [m for msgs in outputs for m, _ in msgs]

    def run_parallel(self, tasks: Sequence[Callable[[], Any]]) -> list:
        """Run independent sub-computations side by side.

        Communication and memory add up; rounds are the longest task's, since
        the tasks occupy disjoint machines and meet at one barrier.
        """
        results, longest = [], 0
        for task in tasks:
            r0 = self.batch.rounds
            results.append(task())
            spent = self.batch.rounds - r0
            self.batch.rounds -= spent
            self.total.rounds -= spent
            longest = max(longest, spent)
        self._charge(rounds=longest)
        return results

    def local_round(self, words_sent: int = 0, load: int = 0) -> None:
        """One barrier for a machine-local step whose traffic was counted by the caller."""
        self._check_load("local_round", load)
        self._charge(rounds=1, comm=words_sent, load=load)

    def batch_cap(self, record_width: int) -> int:
        return self.s // record_width

    def batch_intake(self, updates: Sequence, record_width: int = 3) -> list:
        cap = self.batch_cap(record_width)
        if len(updates) > cap:
            raise BatchSizeError("batch_intake", f"batch of {len(updates)} updates exceeds cap {cap}",
                                 words=len(updates) * record_width, cap=cap)
        return self.bulk_sort(list(updates), key=None if not updates else (lambda x: 0), width=record_width)
