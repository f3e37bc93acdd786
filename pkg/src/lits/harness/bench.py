"""Benchmark execution: index adapters, the timed loop, and shadow verification."""

from __future__ import annotations

import json
import random
import time
from dataclasses import asdict, dataclass, field

from sortedcontainers import SortedDict

from ..index import LitsConfig, LitsIndex
from ..keys import as_key
from ..nodes import KvEntry
from ..pmss import PerformanceModel
from ..subtrie import Subtrie
from .workload import DELETE, INSERT, OP_TYPES, READ, RMW, SCAN, UPDATE, Workload

SCHEMA_VERSION = 1
INDEX_KINDS = ("lits", "lit", "trie", "oracle")


class VerificationError(RuntimeError):
    def __init__(self, position: int, op: tuple, expected, got):
        super().__init__(f"divergence at op #{position} {op[0]} {op[1]!r}: expected {expected!r}, got {got!r}")
        self.position = position
        self.op = op
        self.expected = expected
        self.got = got


class Adapter:
    """Uniform surface over the indexes under test."""

    name = "?"

    def bulkload(self, pairs): ...
    def get(self, key): ...
    def insert(self, key, value) -> bool: ...
    def update(self, key, value) -> bool: ...
    def remove(self, key) -> bool: ...
    def scan(self, key, count) -> list: ...

    def stats(self) -> dict:
        return {}


class LitsAdapter(Adapter):
    def __init__(self, mode: str = "lits", pmss_tables: str | None = None, config: LitsConfig | None = None):
        self.name = mode
        config = config or LitsConfig()
        if mode == "lit":
            config = LitsConfig(**{**config.__dict__, "use_subtries": False})
        self.config = config
        self.pmss = None
        if config.use_subtries:
            self.pmss = (PerformanceModel.from_file(pmss_tables, config.f_r) if pmss_tables
                         else PerformanceModel.default(config.f_r))
        self.index: LitsIndex | None = None

    def bulkload(self, pairs):
        self.index = LitsIndex.bulkload(pairs, config=self.config, pmss=self.pmss)
        idx = self.index
        self.get = idx.get
        self.insert = idx.insert
        self.update = idx.update
        self.remove = idx.remove

    def scan(self, key, count):
        return self.index.scan(key).take(count)

    def stats(self) -> dict:
        s = self.index.stats().as_dict()
        s["resizes"] = self.index.resizes
        s["non_subtrie_height"] = self.index.non_subtrie_height()
        return s


class TrieAdapter(Adapter):
    name = "trie"

    def bulkload(self, pairs):
        entries = sorted((KvEntry(as_key(k), v) for k, v in pairs), key=lambda e: e.key)
        self.trie = Subtrie.bulkload(entries)

    def get(self, key):
        return self.trie.search(as_key(key))

    def insert(self, key, value):
        return self.trie.insert(as_key(key), value)

    def update(self, key, value):
        return self.trie.update(as_key(key), value)

    def remove(self, key):
        return self.trie.delete(as_key(key))

    def scan(self, key, count):
        out = []
        for e in self.trie.iter_from(as_key(key)):
            if len(out) >= count:
                break
            out.append((e.key, e.value))
        return out

    def stats(self) -> dict:
        depths = self.trie.key_depths()
        return {"key_count": len(self.trie), "height": self.trie.height(),
                "avg_height": sum(depths) / len(depths) if depths else 0.0,
                "node_counts": self.trie.node_counts(), "bytes_used": self.trie.nbytes()}


class OracleAdapter(Adapter):
    """Sorted map reference (``sortedcontainers.SortedDict``)."""

    name = "oracle"

    def bulkload(self, pairs):
        self.map = SortedDict((as_key(k), v) for k, v in pairs)
        self.get = self.map.get

    def insert(self, key, value):
        if key in self.map:
            return False
        self.map[key] = value
        return True

    def update(self, key, value):
        if key not in self.map:
            return False
        self.map[key] = value
        return True

    def remove(self, key):
        return self.map.pop(key, None) is not None

    def scan(self, key, count):
        m = self.map
        i = m.bisect_left(key)
        return list(m.items()[i:i + count])

    def stats(self) -> dict:
        return {"key_count": len(self.map)}


def make_adapter(kind: str, pmss_tables: str | None = None, config: LitsConfig | None = None) -> Adapter:
    if kind in ("lits", "lit"):
        return LitsAdapter(kind, pmss_tables, config)
    if kind == "trie":
        return TrieAdapter()
    if kind == "oracle":
        return OracleAdapter()
    raise ValueError(f"unknown index {kind!r}")


def apply_op(ix: Adapter, op: tuple):
    """Execute one operation and return its observable result."""
    kind, key, arg = op
    if kind == READ:
        return ix.get(key)
    if kind == UPDATE:
        if ix.update(key, arg):
            return True
        ix.insert(key, arg)
        return False
    if kind == INSERT:
        return ix.insert(key, arg)
    if kind == SCAN:
        return ix.scan(key, arg)
    if kind == RMW:
        old = ix.get(key)
        if old is not None:
            ix.update(key, (old + arg) & 0xFFFFFFFFFFFFFFFF)
        return old
    if kind == DELETE:
        return ix.remove(key)
    raise ValueError(f"unknown op {kind!r}")


@dataclass
class BenchReport:
    index: str
    workload: str
    dist: str
    op_total: int
    throughput_mops: float
    elapsed_seconds: float
    bulkload_seconds: float
    bulkload_keys: int
    op_counts: dict
    mean_latency_ns: dict
    stats: dict
    config: dict
    verified: bool = False
    verified_ops: int = 0
    dataset: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, bytes):
        return x.decode("ascii")
    if hasattr(x, "__dict__"):
        return x.__dict__
    return str(x)


def run_bench(ix: Adapter, workload: Workload, verify: bool = False, sample_rate: float = 0.01,
              seed: int = 0, config_echo: dict | None = None, dataset: dict | None = None) -> BenchReport:
    t0 = time.perf_counter()
    ix.bulkload(workload.bulk)
    bulk_s = time.perf_counter() - t0

    ops = workload.ops
    sampled: dict[int, object] = {}
    if verify and ops:
        rng = random.Random(seed)
        k = max(1, int(len(ops) * sample_rate))
        picks = set(rng.sample(range(len(ops)), min(k, len(ops))))
    else:
        picks = set()

    spent = dict.fromkeys(OP_TYPES, 0)
    counts = dict.fromkeys(OP_TYPES, 0)
    clock = time.perf_counter_ns
    start = clock()
    for i, op in enumerate(ops):
        t = clock()
        res = apply_op(ix, op)
        spent[op[0]] += clock() - t
        counts[op[0]] += 1
        if i in picks:
            sampled[i] = res
    elapsed = (clock() - start) / 1e9

    if verify:
        shadow = OracleAdapter()
        shadow.bulkload(workload.bulk)
        for i, op in enumerate(ops):
            expected = apply_op(shadow, op)
            if i in sampled and sampled[i] != expected:
                raise VerificationError(i, op, expected, sampled[i])

    total = len(ops)
    return BenchReport(
        index=ix.name,
        workload=workload.spec.kind,
        dist=workload.spec.dist,
        op_total=total,
        throughput_mops=(total / elapsed / 1e6) if total and elapsed > 0 else 0.0,
        elapsed_seconds=elapsed,
        bulkload_seconds=bulk_s,
        bulkload_keys=len(workload.bulk),
        op_counts=counts,
        mean_latency_ns={k: (spent[k] / counts[k] if counts[k] else 0.0) for k in OP_TYPES},
        stats=ix.stats(),
        config=config_echo or {},
        verified=verify,
        verified_ops=len(sampled),
        dataset=dataset or {},
    )
