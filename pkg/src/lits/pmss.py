"""Performance model for choosing between a learned node and a subtrie.

Offline, both structures are benchmarked on synthetic key sets laid out on a
(gpkl, n) grid, giving read and write latency tables per structure. Online,
the expected latency of a structure for a key subset is::

    latency = f_r * readlat(gpkl, n) + f_w * writelat(gpkl, n)

with bilinear interpolation in (gpkl, log2 n) and clamping outside the grid.
The structure with the lower estimate wins; ties go to the learned node.
"""

from __future__ import annotations

import enum
import functools
import math
import random
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from sortedcontainers import SortedList

from .metrics import cpl_pair, gpkl as measure_gpkl

GPKL_GRID = tuple(range(3, 22, 2))
LOG2N_GRID = tuple(range(4, 26))
FAST_LOG2N_GRID = tuple(range(4, 13))

TABLE_MAGIC = "PMSS"
TABLE_VERSION = 1

ALPHABET = bytes(range(33, 127))


class Structure(enum.Enum):
    LEARNED = "learned"
    SUBTRIE = "subtrie"


class TableFormatError(ValueError):
    pass


class GpklUnreachable(RuntimeError):
    def __init__(self, target: float, achieved: float):
        super().__init__(f"could not reach gpkl {target:.3f}; achieved {achieved:.3f}")
        self.target = target
        self.achieved = achieved


@dataclass
class LatencyTable:
    kind: Structure
    gpkl_grid: tuple[int, ...]
    log2n_grid: tuple[int, ...]
    read_ns: np.ndarray
    write_ns: np.ndarray

    def __post_init__(self):
        shape = (len(self.gpkl_grid), len(self.log2n_grid))
        self.read_ns = np.asarray(self.read_ns, dtype=np.float64).reshape(shape)
        self.write_ns = np.asarray(self.write_ns, dtype=np.float64).reshape(shape)

    def _interp(self, grid: np.ndarray, gpkl: float, n: float) -> float:
        g = np.asarray(self.gpkl_grid, dtype=np.float64)
        e = np.asarray(self.log2n_grid, dtype=np.float64)
        x = min(max(float(gpkl), g[0]), g[-1])
        y = min(max(math.log2(max(n, 1)), e[0]), e[-1])
        i = min(int(np.searchsorted(g, x, side="right")) - 1, len(g) - 2)
        j = min(int(np.searchsorted(e, y, side="right")) - 1, len(e) - 2)
        if len(g) == 1:
            i, tx = 0, 0.0
        else:
            i = max(i, 0)
            tx = (x - g[i]) / (g[i + 1] - g[i])
        if len(e) == 1:
            j, ty = 0, 0.0
        else:
            j = max(j, 0)
            ty = (y - e[j]) / (e[j + 1] - e[j])
        i1 = min(i + 1, len(g) - 1)
        j1 = min(j + 1, len(e) - 1)
        return float((1 - tx) * (1 - ty) * grid[i, j] + tx * (1 - ty) * grid[i1, j]
                     + (1 - tx) * ty * grid[i, j1] + tx * ty * grid[i1, j1])

    def readlat(self, gpkl: float, n: float) -> float:
        return self._interp(self.read_ns, gpkl, n)

    def writelat(self, gpkl: float, n: float) -> float:
        return self._interp(self.write_ns, gpkl, n)

    def scaled(self, factor: float) -> "LatencyTable":
        return LatencyTable(self.kind, self.gpkl_grid, self.log2n_grid,
                            self.read_ns * factor, self.write_ns * factor)


def estimate_latency(table: LatencyTable, gpkl: float, n: float, f_r: float, f_w: float | None = None) -> float:
    if f_w is None:
        f_w = 1.0 - f_r
    if abs(f_r + f_w - 1.0) > 1e-9:
        raise ValueError("f_r + f_w must equal 1")
    return f_r * table.readlat(gpkl, n) + f_w * table.writelat(gpkl, n)


def select_for(learned: LatencyTable, subtrie: LatencyTable, gpkl: float, n: float,
               f_r: float, f_w: float | None = None) -> Structure:
    a = estimate_latency(learned, gpkl, n, f_r, f_w)
    b = estimate_latency(subtrie, gpkl, n, f_r, f_w)
    return Structure.SUBTRIE if b < a else Structure.LEARNED


def select_structure(tables: tuple[LatencyTable, LatencyTable], keys: Sequence[bytes],
                     f_r: float, f_w: float | None = None) -> Structure:
    learned, subtrie = tables
    return select_for(learned, subtrie, measure_gpkl(keys), len(keys), f_r, f_w)


class PerformanceModel:
    """Both latency tables plus the workload mix used to weigh them.

    ``observe`` folds operation counters into the mix when ``online`` is set.
    """

    def __init__(self, learned: LatencyTable, subtrie: LatencyTable, f_r: float = 0.5,
                 online: bool = False):
        if not 0.0 <= f_r <= 1.0:
            raise ValueError("f_r must lie in [0, 1]")
        self.learned = learned
        self.subtrie = subtrie
        self.f_r = f_r
        self.online = online
        self._reads = 0
        self._writes = 0

    @property
    def f_w(self) -> float:
        return 1.0 - self.f_r

    @classmethod
    def default(cls, f_r: float = 0.5) -> "PerformanceModel":
        learned, subtrie = default_tables()
        return cls(learned, subtrie, f_r)

    @classmethod
    def from_file(cls, path, f_r: float = 0.5) -> "PerformanceModel":
        learned, subtrie = load_tables(path)
        return cls(learned, subtrie, f_r)

    def estimate(self, gpkl: float, n: float) -> dict[Structure, float]:
        return {Structure.LEARNED: estimate_latency(self.learned, gpkl, n, self.f_r),
                Structure.SUBTRIE: estimate_latency(self.subtrie, gpkl, n, self.f_r)}

    def select(self, keys: Sequence[bytes]) -> Structure:
        return select_for(self.learned, self.subtrie, measure_gpkl(keys), len(keys), self.f_r)

    def observe(self, reads: int = 0, writes: int = 0) -> None:
        if not self.online:
            return
        self._reads += reads
        self._writes += writes
        total = self._reads + self._writes
        if total:
            self.f_r = self._reads / total


class AlwaysLearned:
    """Selector used when subtries are disabled."""

    f_r = 1.0

    def select(self, keys: Sequence[bytes]) -> Structure:
        return Structure.LEARNED

    def observe(self, reads: int = 0, writes: int = 0) -> None:
        pass


# -- table files --------------------------------------------------------------

def _fmt(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def dumps_tables(learned: LatencyTable, subtrie: LatencyTable) -> str:
    if learned.gpkl_grid != subtrie.gpkl_grid or learned.log2n_grid != subtrie.log2n_grid:
        raise ValueError("both tables must share one grid")
    lines = [f"{TABLE_MAGIC}\t{TABLE_VERSION}",
             "gpkl=" + ",".join(map(str, learned.gpkl_grid))
             + "\tlog2n=" + ",".join(map(str, learned.log2n_grid))]
    for table, tag in ((learned, "L"), (subtrie, "T")):
        for i, g in enumerate(table.gpkl_grid):
            for j, e in enumerate(table.log2n_grid):
                lines.append(f"{tag}\t{g}\t{e}\t{_fmt(table.read_ns[i, j])}\t{_fmt(table.write_ns[i, j])}")
    return "\n".join(lines) + "\n"


def loads_tables(text: str) -> tuple[LatencyTable, LatencyTable]:
    lines = text.splitlines()
    if len(lines) < 2:
        raise TableFormatError("truncated PMSS table file")
    head = lines[0].split("\t")
    if head[0] != TABLE_MAGIC:
        raise TableFormatError(f"bad magic {head[0]!r}")
    if len(head) != 2 or head[1] != str(TABLE_VERSION):
        raise TableFormatError(f"unsupported PMSS table version {head[1:]!r}")
    try:
        fields = dict(part.split("=", 1) for part in lines[1].split("\t"))
        gg = tuple(int(v) for v in fields["gpkl"].split(","))
        eg = tuple(int(v) for v in fields["log2n"].split(","))
    except (ValueError, KeyError) as exc:
        raise TableFormatError(f"bad grid line: {lines[1]!r}") from exc
    cells = {"L": {}, "T": {}}
    for ln in lines[2:]:
        if not ln:
            continue
        parts = ln.split("\t")
        if len(parts) != 5 or parts[0] not in cells:
            raise TableFormatError(f"bad row: {ln!r}")
        try:
            cells[parts[0]][(int(parts[1]), int(parts[2]))] = (float(parts[3]), float(parts[4]))
        except ValueError as exc:
            raise TableFormatError(f"bad row: {ln!r}") from exc
    out = []
    for tag, kind in (("L", Structure.LEARNED), ("T", Structure.SUBTRIE)):
        read = np.empty((len(gg), len(eg)))
        write = np.empty((len(gg), len(eg)))
        for i, g in enumerate(gg):
            for j, e in enumerate(eg):
                try:
                    read[i, j], write[i, j] = cells[tag][(g, e)]
                except KeyError as exc:
                    raise TableFormatError(f"missing cell {tag} gpkl={g} log2n={e}") from exc
        out.append(LatencyTable(kind, gg, eg, read, write))
    return out[0], out[1]


def save_tables(path, learned: LatencyTable, subtrie: LatencyTable) -> None:
    Path(path).write_text(dumps_tables(learned, subtrie))


def load_tables(path) -> tuple[LatencyTable, LatencyTable]:
    return loads_tables(Path(path).read_text())


@functools.lru_cache(maxsize=1)
def default_tables() -> tuple[LatencyTable, LatencyTable]:
    """Tables calibrated at package build time (``calibrate --fast``)."""
    text = resources.files("lits").joinpath("data/pmss_default.tsv").read_text()
    return loads_tables(text)


# -- synthetic datasets with a target gpkl -------------------------------------

@dataclass
class GpklGenConfig:
    target_gpkl: float
    n: int
    dict_size: int = 10000
    dict_len_range: tuple[int, int] = (2, 6)
    base_len_range: tuple[int, int] = (6, 12)
    k: int = 32
    seed: int = 0
    max_rounds: int | None = None


@dataclass
class GeneratedKeys:
    keys: list[bytes]
    gpkl: float
    initial_gpkl: float
    rounds: int = 0
    info: dict = field(default_factory=dict)


class _GpklTracker:
    """Sorted key list with an incrementally maintained gpkl."""

    def __init__(self, keys: list[bytes]):
        self.keys = SortedList(keys)
        self.total = sum(self._term(i) for i in range(len(self.keys)))

    def _term(self, i: int) -> int:
        L = self.keys
        best = -1
        if i > 0:
            best = cpl_pair(L[i - 1], L[i])
        if i + 1 < len(L):
            best = max(best, cpl_pair(L[i], L[i + 1]))
        return best + 1

    def _terms(self, lo: int, hi: int) -> int:
        lo = max(lo, 0)
        hi = min(hi, len(self.keys) - 1)
        return sum(self._term(i) for i in range(lo, hi + 1))

    def gpkl(self) -> float:
        L = self.keys
        return self.total / len(L) - cpl_pair(L[0], L[-1])

    def remove(self, key: bytes) -> None:
        i = self.keys.index(key)
        self.total -= self._terms(i - 1, i + 1)
        del self.keys[i]
        self.total += self._terms(i - 1, i)

    def add(self, key: bytes) -> None:
        i = self.keys.bisect_left(key)
        self.total -= self._terms(i - 1, i)
        self.keys.add(key)
        self.total += self._terms(i - 1, i + 1)


def _random_string(rng: random.Random, lo: int, hi: int) -> bytes:
    return bytes(rng.choices(ALPHABET, k=rng.randint(lo, hi)))


def generate_gpkl_keys(cfg: GpklGenConfig) -> GeneratedKeys:
    if cfg.n < 2:
        raise ValueError("need n >= 2")
    rng = random.Random(cfg.seed)
    dictionary = [_random_string(rng, *cfg.dict_len_range) for _ in range(cfg.dict_size)]
    seen: set[bytes] = set()
    while len(seen) < cfg.n:
        seen.add(_random_string(rng, *cfg.base_len_range))
    tracker = _GpklTracker(sorted(seen))
    g0 = tracker.gpkl()
    if g0 >= cfg.target_gpkl:
        return GeneratedKeys(list(tracker.keys), g0, g0, 0)
    # a block spanning the whole list only grows the shared prefix, which gpkl discounts
    k = max(2, min(cfg.k, cfg.n // 2))
    budget = cfg.max_rounds if cfg.max_rounds is not None else 200 * cfg.n + 10000
    rounds = 0
    attempts = 0
    g = g0
    while g < cfg.target_gpkl:
        attempts += 1
        if attempts > budget:
            raise GpklUnreachable(cfg.target_gpkl, g)
        a = rng.randrange(0, cfg.n - k + 1)
        block = tracker.keys[a:a + k]
        c = cpl_pair(block[0], block[-1])
        sp = rng.choice(dictionary)
        j = rng.randint(0, c)
        fresh = [s[:j] + sp + s[j:] for s in block]
        if len(max(fresh, key=len)) > 255 or any(s in seen for s in fresh):
            continue
        for s in block:
            tracker.remove(s)
            seen.discard(s)
        for s in fresh:
            tracker.add(s)
            seen.add(s)
        rounds += 1
        g = tracker.gpkl()
    return GeneratedKeys(list(tracker.keys), g, g0, rounds)


def gen_gpkl_dataset(cfg: GpklGenConfig) -> list[bytes]:
    """Sorted distinct keys whose gpkl is just at or above ``cfg.target_gpkl``."""
    return generate_gpkl_keys(cfg).keys


# -- calibration ----------------------------------------------------------------

def _time_per_op(fn: Callable[[], int], min_ns: int) -> float:
    """Run ``fn`` (returns the op count it performed) until ``min_ns`` elapsed."""
    ops = 0
    spent = 0
    while spent < min_ns or ops == 0:
        t0 = time.perf_counter_ns()
        done = fn()
        spent += time.perf_counter_ns() - t0
        ops += done
    return spent / ops


def _round_sig(x: float, digits: int = 4) -> float:
    if x <= 0 or not math.isfinite(x):
        return x
    return float(f"{x:.{digits}g}")


def measure_cell(keys: Sequence[bytes], kind: Structure, seed: int = 0,
                 min_ns: int = 2_000_000, write_fraction: float = 0.125) -> tuple[float, float]:
    """Mean read (hits) and write (fresh inserts) latency in ns for one structure."""
    from .index import LitsConfig, LitsIndex
    from .nodes import KvEntry
    from .subtrie import Subtrie

    rng = random.Random(seed)
    keys = list(keys)
    rng.shuffle(keys)
    m = max(4, int(len(keys) * write_fraction))
    load = sorted(keys[m:])
    fresh = keys[:m]
    values = {k: rng.getrandbits(63) for k in keys}

    def build():
        if kind is Structure.SUBTRIE:
            return Subtrie.bulkload([KvEntry(k, values[k]) for k in load])
        return LitsIndex.bulkload([(k, values[k]) for k in load], config=LitsConfig(use_subtries=False))

    target = build()
    probes = [load[rng.randrange(len(load))] for _ in range(512)]
    # internal finders on both sides so neither pays for argument validation
    find = target.find if kind is Structure.SUBTRIE else target._find
    # warm-up
    for k in probes[:64]:
        find(k)

    def reads() -> int:
        for k in probes:
            find(k)
        return len(probes)

    read_ns = _time_per_op(reads, min_ns)

    write_ops = 0
    write_spent = 0
    while write_spent < min_ns or write_ops == 0:
        t = build()
        ins = t.insert if kind is Structure.SUBTRIE else t._insert
        t0 = time.perf_counter_ns()
        for k in fresh:
            ins(k, values[k])
        write_spent += time.perf_counter_ns() - t0
        write_ops += len(fresh)
    return read_ns, write_spent / write_ops


def calibrate(gpkl_grid: Sequence[int] = GPKL_GRID, log2n_grid: Sequence[int] = LOG2N_GRID,
              seed: int = 0, min_ns: int = 2_000_000,
              progress: Callable[[str], None] | None = None) -> tuple[LatencyTable, LatencyTable]:
    """Benchmark both structures over the (gpkl, n) grid.

    Cells whose gpkl target lies below what random strings of that size
    already have use the unmodified random set.
    """
    shape = (len(gpkl_grid), len(log2n_grid))
    tables = {s: (np.empty(shape), np.empty(shape)) for s in Structure}
    for j, e in enumerate(log2n_grid):
        n = 1 << e
        for i, g in enumerate(gpkl_grid):
            cell_seed = seed * 1_000_003 + e * 101 + g
            got = generate_gpkl_keys(GpklGenConfig(target_gpkl=g, n=n, seed=cell_seed))
            for s in Structure:
                r, w = measure_cell(got.keys, s, seed=cell_seed, min_ns=min_ns)
                tables[s][0][i, j] = _round_sig(r)
                tables[s][1][i, j] = _round_sig(w)
            if progress:
                progress(f"gpkl={g} n=2^{e} achieved={got.gpkl:.2f} "
                         f"learned={tables[Structure.LEARNED][0][i, j]:.0f}/{tables[Structure.LEARNED][1][i, j]:.0f}ns "
                         f"subtrie={tables[Structure.SUBTRIE][0][i, j]:.0f}/{tables[Structure.SUBTRIE][1][i, j]:.0f}ns")
    gg = tuple(gpkl_grid)
    eg = tuple(log2n_grid)
    return (LatencyTable(Structure.LEARNED, gg, eg, *tables[Structure.LEARNED]),
            LatencyTable(Structure.SUBTRIE, gg, eg, *tables[Structure.SUBTRIE]))
