"""Linear l0-sampler sketches over signed edge-incidence vectors.

Each sketch is a stack of independent sampler instances.  Instance j keeps one
one-sparse recovery cell per subsampling level; a coordinate i lives in level
l when its pairwise hash falls below P / 2^l, so levels are nested.  A cell
stores (count, weighted sum, fingerprint) and decodes when the three agree on a
single coordinate.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from sympy import nextprime

from ._rand import MERSENNE_61, derive_seed

REPETITION_CONSTANT = 4
STORAGE_CONSTANT = 64
_INT64_SAFE = 1 << 62


class SketchError(ValueError):
    pass


class IncompatibleSketchError(SketchError):
    pass


@lru_cache(maxsize=None)
def fingerprint_modulus(dimension: int) -> int:
    return int(nextprime(dimension**3))


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**12)


@dataclass(frozen=True)
class SketchParams:
    dimension: int
    failure_prob: Fraction
    seed: int = 0

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise SketchError(f"dimension must be a positive integer, got {self.dimension}")
        delta = _as_fraction(self.failure_prob)
        if not 0 < delta < 1:
            raise SketchError(f"failure probability must lie in (0, 1), got {self.failure_prob}")
        object.__setattr__(self, "failure_prob", delta)
        object.__setattr__(self, "seed", int(self.seed) & ((1 << 64) - 1))

    @cached_property
    def repetitions(self) -> int:
        return max(1, math.ceil(REPETITION_CONSTANT * math.log(1 / float(self.failure_prob)) - 1e-12))

    @cached_property
    def levels(self) -> int:
        return (self.dimension - 1).bit_length() + 1

    @cached_property
    def modulus(self) -> int:
        return fingerprint_modulus(self.dimension)

    @cached_property
    def words(self) -> int:
        return 3 * self.repetitions * self.levels

    @cached_property
    def shape(self) -> tuple[int, int]:
        return self.repetitions, self.levels

    def with_seed(self, seed: int) -> SketchParams:
        return SketchParams(self.dimension, self.failure_prob, seed)


def storage_bound(params: SketchParams) -> float:
    """K * log2(N)^2 * ln(1/delta), with log2(N) floored at 1."""
    lg = max(1.0, math.log2(params.dimension))
    return STORAGE_CONSTANT * lg * lg * math.log(1 / float(params.failure_prob))


@lru_cache(maxsize=4096)
def _instance_randomness(dimension: int, seed: int, reps: int):
    q = fingerprint_modulus(dimension)
    a, b, r = [], [], []
    for j in range(reps):
        rng = random.Random(derive_seed(seed, j))
        a.append(rng.randrange(1, MERSENNE_61))
        b.append(rng.randrange(0, MERSENNE_61))
        r.append(rng.randrange(2, max(3, q - 1)))
    return tuple(a), tuple(b), tuple(r)


def _depth(hv: int, levels: int) -> int:
    """Deepest level (0-based) whose subsampling threshold admits hash value hv."""
    d = min(levels - 1, 61 - hv.bit_length())
    while d > 0 and hv >= (MERSENNE_61 >> d):
        d -= 1
    return d


@lru_cache(maxsize=1 << 17)
def _contribution(params: SketchParams, index: int):
    """Per-instance deepest level and r^index mod q for one coordinate."""
    a, b, r = _instance_randomness(params.dimension, params.seed, params.repetitions)
    q = params.modulus
    L = params.levels
    depth = np.fromiter((_depth((a[j] * index + b[j]) % MERSENNE_61, L) for j in range(len(a))),
                        dtype=np.int64, count=len(a))
    powers = [pow(r[j], index, q) for j in range(len(a))]
    return depth, powers


def _fp_dtype(params: SketchParams):
    return np.int64 if params.modulus < _INT64_SAFE else object


def _zeros(shape, params: SketchParams):
    count = np.zeros(shape, dtype=np.int64)
    wsum = np.zeros(shape, dtype=np.int64)
    fp = np.zeros(shape, dtype=np.int64)
    if _fp_dtype(params) is object:
        fp = fp.astype(object)
    return count, wsum, fp


def _delta_cells(params: SketchParams, index: int, delta: int):
    """Dense (count, wsum, fp) increments for x_index += delta."""
    depth, powers = _contribution(params, index)
    mask = np.arange(params.levels)[None, :] <= depth[:, None]
    q = params.modulus
    add = [(delta * p) % q for p in powers]
    if _fp_dtype(params) is object:
        fp_add = np.array(add, dtype=object)[:, None] * mask
    else:
        fp_add = np.array(add, dtype=np.int64)[:, None] * mask
    m = mask.astype(np.int64)
    return delta * m, (delta * index) * m, fp_add


def fold_mod(stack: np.ndarray, q: int, axis: int = 0) -> np.ndarray:
    """Sum along an axis modulo q without overflowing int64."""
    if stack.dtype == object:
        return np.sum(stack, axis=axis) % q
    n = stack.shape[axis]
    if n == 0:
        shape = list(stack.shape)
        del shape[axis]
        return np.zeros(shape, dtype=np.int64)
    per = max(1, ((1 << 63) - 1) // q - 1)
    if n <= per:
        return np.sum(stack, axis=axis) % q
    acc = None
    for lo in range(0, n, per):
        part = np.sum(np.take(stack, range(lo, min(n, lo + per)), axis=axis), axis=axis) % q
        acc = part if acc is None else (acc + part) % q
    return acc


class L0Sketch:
    """Sketch of a vector in Z^N; updates return new sketches."""

    __slots__ = ("params", "count", "wsum", "fp")

    def __init__(self, params: SketchParams, count=None, wsum=None, fp=None):
        self.params = params
        if count is None:
            count, wsum, fp = _zeros(params.shape, params)
        self.count = count
        self.wsum = wsum
        self.fp = fp

    def copy(self) -> L0Sketch:
        return L0Sketch(self.params, self.count.copy(), self.wsum.copy(), self.fp.copy())

    def update(self, index: int, delta: int) -> L0Sketch:
        out = self.copy()
        out.update_inplace(index, delta)
        return out

    def update_inplace(self, index: int, delta: int) -> None:
        _check_index(self.params, index)
        dc, dw, df = _delta_cells(self.params, index, int(delta))
        self.count += dc
        self.wsum += dw
        self.fp = (self.fp + df) % self.params.modulus

    def merge(self, other: L0Sketch) -> L0Sketch:
        if self.params != other.params:
            raise IncompatibleSketchError("sketches were built with different parameters")
        q = self.params.modulus
        return L0Sketch(self.params, self.count + other.count, self.wsum + other.wsum,
                        (self.fp + other.fp) % q)

    __add__ = merge

    def query(self) -> int | None:
        return decode_cells(self.params, self.count, self.wsum, self.fp)

    def is_zero(self) -> bool:
        return not (self.count.any() or self.wsum.any() or np.any(self.fp != 0))

    def cells_equal(self, other: L0Sketch) -> bool:
        return (self.params == other.params and np.array_equal(self.count, other.count)
                and np.array_equal(self.wsum, other.wsum)
                and bool(np.all(self.fp == other.fp)))

    @property
    def words(self) -> int:
        return self.params.words

    def to_bytes(self) -> bytes:
        return serialize(self)

    @classmethod
    def from_bytes(cls, blob: bytes) -> L0Sketch:
        return deserialize(blob)

    def __repr__(self):
        p = self.params
        return f"L0Sketch(N={p.dimension}, delta={p.failure_prob}, seed={p.seed}, shape={p.shape})"


def _check_index(params: SketchParams, index: int) -> None:
    if not 1 <= index <= params.dimension:
        raise SketchError(f"coordinate {index} outside [1, {params.dimension}]")


def new_sketch(params: SketchParams) -> L0Sketch:
    return L0Sketch(params)


def update(sketch: L0Sketch, index: int, delta: int) -> L0Sketch:
    if delta not in (1, -1):
        raise SketchError("updates are restricted to delta = +1 or -1")
    return sketch.update(index, delta)


def merge(a: L0Sketch, b: L0Sketch) -> L0Sketch:
    return a.merge(b)


def query(sketch: L0Sketch) -> int | None:
    return sketch.query()


def decode_cells(params: SketchParams, count, wsum, fp) -> int | None:
    """First successful one-sparse decode: instances in order, levels top-down."""
    nz = count != 0
    if not nz.any():
        return None
    safe = np.where(nz, count, 1)
    cand = nz & (wsum % safe == 0)
    idx = wsum // safe
    cand &= (idx >= 1) & (idx <= params.dimension)
    if not cand.any():
        return None
    _, _, r = _instance_randomness(params.dimension, params.seed, params.repetitions)
    q = params.modulus
    rows, cols = np.nonzero(cand[:, ::-1])
    L = params.levels
    for j, rc in zip(rows.tolist(), cols.tolist()):
        lvl = L - 1 - rc
        i = int(idx[j, lvl])
        c = int(count[j, lvl])
        if (c % q) * pow(r[j], i, q) % q == int(fp[j, lvl]):
            return i
    return None


# --- serialisation -------------------------------------------------------

def _word_bytes(params: SketchParams) -> int:
    return 8 if params.modulus < (1 << 63) else 16


def serialize(sketch: L0Sketch) -> bytes:
    p = sketch.params
    wb = _word_bytes(p)
    header = [wb, p.dimension, p.failure_prob.numerator, p.failure_prob.denominator,
              p.seed, p.repetitions, p.levels]
    out = bytearray()
    for h in header:
        out += int(h).to_bytes(8, "little", signed=False)
    for arr in (sketch.count, sketch.wsum, sketch.fp):
        for v in arr.ravel().tolist():
            out += int(v).to_bytes(wb, "little", signed=True)
    return bytes(out)


def deserialize(blob: bytes) -> L0Sketch:
    head = [int.from_bytes(blob[8 * i:8 * i + 8], "little") for i in range(7)]
    wb, n, num, den, seed, reps, levels = head
    params = SketchParams(n, Fraction(num, den), seed)
    if params.shape != (reps, levels):
        raise SketchError("serialised shape does not match its parameters")
    body = blob[56:]
    cells = reps * levels
    if len(body) != 3 * cells * wb:
        raise SketchError("truncated sketch payload")
    vals = [int.from_bytes(body[k:k + wb], "little", signed=True) for k in range(0, len(body), wb)]
    count = np.array(vals[:cells], dtype=np.int64).reshape(reps, levels)
    wsum = np.array(vals[cells:2 * cells], dtype=np.int64).reshape(reps, levels)
    fp = np.array(vals[2 * cells:], dtype=_fp_dtype(params)).reshape(reps, levels)
    return L0Sketch(params, count, wsum, fp)


# --- edge coordinates ----------------------------------------------------

def edge_dimension(n: int) -> int:
    return max(1, n * (n - 1) // 2)


def edge_index(n: int, u: int, v: int) -> int:
    """Lexicographic rank of {u, v} among pairs j < k, starting at 1."""
    if u == v or not (0 <= u < n and 0 <= v < n):
        raise SketchError(f"invalid edge ({u}, {v}) for n={n}")
    j, k = (u, v) if u < v else (v, u)
    return j * (2 * n - j - 1) // 2 + (k - j - 1) + 1


def edge_from_index(n: int, index: int) -> tuple[int, int]:
    r = index - 1
    j = bisect_right(range(n), r, key=lambda x: x * (2 * n - x - 1) // 2) - 1
    k = r - j * (2 * n - j - 1) // 2 + j + 1
    return j, k


def incidence_sign(vertex: int, u: int, v: int) -> int:
    """+1 when vertex is the larger endpoint, -1 when it is the smaller."""
    return 1 if vertex == max(u, v) else -1


def vertex_sketch(params: SketchParams, n: int, vertex: int, neighbours: Iterable[int]) -> L0Sketch:
    s = L0Sketch(params)
    for w in neighbours:
        s.update_inplace(edge_index(n, vertex, w), incidence_sign(vertex, vertex, w))
    return s


def sample_vertex_edge(sketch: L0Sketch, n: int) -> tuple[int, int] | None:
    i = sketch.query()
    return None if i is None else edge_from_index(n, i)


def sample_cut_edge(sketches: Mapping[int, L0Sketch] | Sequence[L0Sketch], A: Iterable[int],
                    n: int) -> tuple[int, int] | None:
    A = set(A)
    if not A or len(A) >= n:
        raise SketchError("cut side must be a nonempty proper subset of the vertices")
    it = iter(sorted(A))
    acc = sketches[next(it)].copy()
    for v in it:
        acc = acc.merge(sketches[v])
    return sample_vertex_edge(acc, n)


def pair_update(sketch: L0Sketch, n: int, u: int, v: int, delta: int) -> L0Sketch:
    return sketch.update(edge_index(n, u, v), delta)


def sample_pair_edge(pair_sketch: L0Sketch, n: int) -> tuple[int, int] | None:
    return sample_vertex_edge(pair_sketch, n)


class SketchBank:
    """Per-vector cell stacks for several sketch copies sharing (N, delta).

    Copy c has its own seed.  Vectors that were never touched are implicit
    zero sketches; memory accounting still charges them in full.
    """

    def __init__(self, params: Sequence[SketchParams]):
        if not params:
            raise SketchError("a bank needs at least one sketch copy")
        base = params[0]
        for p in params:
            if (p.dimension, p.failure_prob) != (base.dimension, base.failure_prob):
                raise IncompatibleSketchError("bank copies must share dimension and delta")
        self.params = list(params)
        self.shape = (len(params),) + base.shape
        self.q = base.modulus
        self._cells: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    @property
    def copies(self) -> int:
        return len(self.params)

    @property
    def words_per_vector(self) -> int:
        return self.copies * self.params[0].words

    def _stack_delta(self, index: int, delta: int, copies: Sequence[int] | None = None):
        cs = range(self.copies) if copies is None else copies
        parts = [_delta_cells(self.params[c], index, delta) for c in cs]
        return (np.stack([p[0] for p in parts]), np.stack([p[1] for p in parts]),
                np.stack([p[2] for p in parts]))

    def _get(self, v: int):
        cell = self._cells.get(v)
        if cell is None:
            cell = _zeros(self.shape, self.params[0])
            self._cells[v] = cell
        return cell

    def add(self, v: int, index: int, delta: int, *, _cache=None) -> None:
        d = _cache if _cache is not None else self._stack_delta(index, 1)
        count, wsum, fp = self._get(v)
        count += delta * d[0]
        wsum += delta * d[1]
        self._cells[v] = (count, wsum, (fp + (d[2] if delta > 0 else self.q - d[2])) % self.q)

    def add_edge(self, n: int, u: int, v: int, delta: int) -> None:
        """Apply +-1 for edge {u, v} to both endpoint vectors with incidence signs."""
        idx = edge_index(n, u, v)
        d = self._stack_delta(idx, 1)
        lo, hi = (u, v) if u < v else (v, u)
        self.add(hi, idx, delta, _cache=d)
        self.add(lo, idx, -delta, _cache=d)

    def sketch(self, v: int, copy: int = 0) -> L0Sketch:
        p = self.params[copy]
        cell = self._cells.get(v)
        if cell is None:
            return L0Sketch(p)
        return L0Sketch(p, cell[0][copy].copy(), cell[1][copy].copy(), cell[2][copy].copy())

    def aggregate(self, vertices: Iterable[int], copy: int = 0) -> L0Sketch:
        p = self.params[copy]
        present = [self._cells[v] for v in vertices if v in self._cells]
        if not present:
            return L0Sketch(p)
        count = np.sum([c[0][copy] for c in present], axis=0)
        wsum = np.sum([c[1][copy] for c in present], axis=0)
        fp = fold_mod(np.stack([c[2][copy] for c in present]), self.q)
        return L0Sketch(p, count, wsum, fp)

    def reseed_copy(self, copy: int, params: SketchParams, n: int,
                    edges: Iterable[tuple[int, int]]) -> None:
        """Replace one copy by a fresh sketch of the given edge set."""
        base = self.params[0]
        if (params.dimension, params.failure_prob) != (base.dimension, base.failure_prob):
            raise IncompatibleSketchError("replacement copy has a different shape")
        self.params[copy] = params
        for cell in self._cells.values():
            cell[0][copy] = 0
            cell[1][copy] = 0
            cell[2][copy] = 0
        edges = sorted((min(u, v), max(u, v)) for u, v in edges)
        if not edges:
            return
        verts = sorted({x for e in edges for x in e})
        slot = {x: k for k, x in enumerate(verts)}
        count, wsum, fp = _zeros((len(verts),) + base.shape, params)
        q = params.modulus
        levels = np.arange(params.levels)
        idx = np.array([edge_index(n, u, v) for u, v in edges], dtype=np.int64)
        contrib = [_contribution(params, int(i)) for i in idx]
        mask = (levels[None, None, :] <= np.stack([c[0] for c in contrib])[:, :, None]).astype(np.int64)
        pw = np.array([c[1] for c in contrib], dtype=fp.dtype)
        hi = np.array([slot[v] for _, v in edges])
        lo = np.array([slot[u] for u, _ in edges])
        np.add.at(count, hi, mask)
        np.add.at(count, lo, -mask)
        np.add.at(wsum, hi, mask * idx[:, None, None])
        np.add.at(wsum, lo, -mask * idx[:, None, None])
        fp_pos = mask * pw[:, :, None]
        fp_neg = mask * ((q - pw) % q)[:, :, None]
        per = max(1, ((1 << 63) - 1) // q - 1) if fp.dtype != object else len(edges)
        for start in range(0, len(edges), per):
            sl = slice(start, start + per)
            np.add.at(fp, hi[sl], fp_pos[sl])
            np.add.at(fp, lo[sl], fp_neg[sl])
            fp %= q
        for x, k in slot.items():
            cell = self._get(x)
            cell[0][copy] = count[k]
            cell[1][copy] = wsum[k]
            cell[2][copy] = fp[k]

    def vertices(self) -> list[int]:
        return sorted(self._cells)

    def equals(self, other: SketchBank) -> bool:
        if self.params != other.params:
            return False
        for v in set(self._cells) | set(other._cells):
            a = self._get(v)
            b = other._get(v)
            if not (np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
                    and bool(np.all(a[2] == b[2]))):
                return False
        return True
