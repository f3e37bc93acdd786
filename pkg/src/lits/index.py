"""The top-level ordered string index.

A tree of model nodes addressed through a shared HPT, with compact leaf nodes
for small key clusters and subtries for key subsets the performance model
judges hard. The root is always a :class:`ModelNode`; for tiny indexes it is a
wrapper that routes every key to slot 1.

Mutations are single-writer: callers serialise writes with reads.
"""

from __future__ import annotations

import math
import random
import time
from bisect import bisect_left
from dataclasses import dataclass, field, replace
from operator import attrgetter
from typing import Iterable, Iterator, Mapping, Sequence

from .hpt import Hpt, HptConfig, should_rebuild
from .keys import as_key, probe_key
from .nodes import (
    KV_HEADER_BYTES,
    CompactNode,
    KvEntry,
    ModelNode,
    Status,
    array_len_for,
    build_model_node,
    build_wrapper_node,
    iter_entries,
)
from .pmss import AlwaysLearned, PerformanceModel, Structure
from .subtrie import Subtrie

_entry_key = attrgetter("key")


class DuplicateKeyError(ValueError):
    def __init__(self, key: bytes):
        super().__init__(f"duplicate key in bulkload input: {key!r}")
        self.key = key


class InvariantError(AssertionError):
    pass


@dataclass(frozen=True)
class LitsConfig:
    w: int = 16
    collision_slot_limit: float = 0.5
    resize_grow_trigger: float = 2.0
    resize_shrink_trigger: float = 0.25
    # False gives the plain learned tree: subtries only where the 50% rule forces one
    use_subtries: bool = True
    # reserve w slots in every compact node instead of sizing it exactly
    prealloc_cnodes: bool = False
    subtrie_delete_ratio: float = 0.25
    f_r: float = 0.5
    online_mix: bool = False
    hpt: HptConfig = field(default_factory=HptConfig)

    def __post_init__(self):
        if self.w < 0:
            raise ValueError("w must be >= 0")
        if not 0 < self.collision_slot_limit < 1:
            raise ValueError("collision_slot_limit must lie in (0, 1)")
        if self.resize_grow_trigger <= 1:
            raise ValueError("resize_grow_trigger must exceed 1")
        if not 0 <= self.resize_shrink_trigger < 0.5:
            raise ValueError("resize_shrink_trigger must lie in [0, 0.5)")
        if not 0 <= self.f_r <= 1:
            raise ValueError("f_r must lie in [0, 1]")


@dataclass
class IndexStats:
    key_count: int
    avg_base_height: float
    max_base_height: int
    # mean subtrie levels over all keys (0 for keys outside subtries)
    avg_subtrie_height: float
    # the same mean restricted to keys stored in subtries
    avg_height_in_subtries: float
    max_subtrie_height: int
    node_counts: dict
    bytes_used: int
    bytes_breakdown: dict

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _normalize_entries(entries) -> list[KvEntry]:
    if isinstance(entries, Mapping):
        entries = entries.items()
    out = [KvEntry(as_key(k), int(v)) for k, v in entries]
    out.sort(key=_entry_key)
    for a, b in zip(out, out[1:]):
        if a.key == b.key:
            raise DuplicateKeyError(a.key)
    return out


class LitsIndex:
    def __init__(self, hpt: Hpt, config: LitsConfig | None = None, pmss=None):
        self.hpt = hpt
        self.config = config or LitsConfig()
        if pmss is None:
            pmss = PerformanceModel.default(self.config.f_r) if self.config.use_subtries else AlwaysLearned()
        if isinstance(pmss, PerformanceModel):
            pmss.online = pmss.online or self.config.online_mix
        self.pmss = pmss
        self.w = self.config.w
        self.reserved = self.config.w if self.config.prealloc_cnodes else 0
        self._wrapped = True
        self._set_wrap_limits(0)
        self.root: ModelNode = build_wrapper_node([], self._child_for)
        self.resizes = 0
        self.resize_work = 0
        self.bulkload_seconds = 0.0
        self._reads = 0
        self._writes = 0

    # -- construction --------------------------------------------------------

    @classmethod
    def bulkload(cls, entries: Iterable[tuple] | Mapping, config: LitsConfig | None = None,
                 pmss=None, hpt: Hpt | None = None) -> "LitsIndex":
        """Build from (key, value) pairs in any order; duplicate keys are an error."""
        t0 = time.perf_counter()
        config = config or LitsConfig()
        items = _normalize_entries(entries)
        if hpt is None:
            if not items:
                raise ValueError("bulkload needs at least one key (or an explicit hpt)")
            hpt = Hpt.from_keys([e.key for e in items], config.hpt)
        idx = cls(hpt, config, pmss)
        idx.root = idx._build_root(items)
        idx.bulkload_seconds = time.perf_counter() - t0
        return idx

    def _choose(self, entries: Sequence[KvEntry]) -> Structure:
        if not self.config.use_subtries:
            return Structure.LEARNED
        return self.pmss.select([e.key for e in entries])

    def _subtrie(self, entries: Sequence[KvEntry]) -> Subtrie:
        return Subtrie.bulkload(entries, self.config.subtrie_delete_ratio)

    def _build_large(self, entries: list, choice: Structure | None = None):
        """A ModelNode or Subtrie over more than ``w`` entries."""
        if choice is None:
            choice = self._choose(entries)
        if choice is Structure.SUBTRIE:
            return self._subtrie(entries)
        return build_model_node(entries, self.hpt, self._child_for)

    def _build_item(self, entries: list, parent_total: int | None = None):
        n = len(entries)
        if n == 0:
            return None
        if n == 1:
            return entries[0]
        if parent_total is not None and n > self.config.collision_slot_limit * parent_total:
            return self._subtrie(entries)
        if n <= self.w:
            return CompactNode(entries, self.reserved)
        return self._build_large(entries)

    def _child_for(self, group: list, parent_total: int):
        return self._build_item(group, parent_total)

    def _set_wrap_limits(self, n: int) -> None:
        # A wrapper holds only four slots, so its resize points are taken from the
        # array a learned root over n keys would have had.
        virtual = array_len_for(max(n, 1))
        self._wrap_grow_at = self.config.resize_grow_trigger * virtual
        self._wrap_shrink_at = self.config.resize_shrink_trigger * virtual if virtual > 4 else -1.0

    def _build_root(self, entries: list) -> ModelNode:
        n = len(entries)
        self._wrapped = True
        self._set_wrap_limits(n)
        if n > self.w and n > 1:
            choice = self._choose(entries)
            if choice is Structure.LEARNED:
                self._wrapped = False
                return build_model_node(entries, self.hpt, self._child_for)
            return build_wrapper_node(entries, lambda g, _n: self._subtrie(g))
        # small roots: the wrapper is exempt from the 50% rule
        return build_wrapper_node(entries, lambda g, _n: self._build_item(g))

    # -- lookups ---------------------------------------------------------------

    def _find(self, key: bytes) -> KvEntry | None:
        hpt = self.hpt
        node = self.root
        while True:
            item = node.items[node.locate(key, hpt)]
            t = type(item)
            if t is ModelNode:
                node = item
                continue
            if item is None:
                return None
            if t is KvEntry:
                return item if item.key == key else None
            return item.find(key)

    def get(self, key, default=None):
        k = probe_key(key)
        if k is None:
            return default
        self._reads += 1
        e = self._find(k)
        return default if e is None else e.value

    search = get

    def __contains__(self, key) -> bool:
        k = probe_key(key)
        return k is not None and self._find(k) is not None

    def __getitem__(self, key):
        k = probe_key(key)
        e = None if k is None else self._find(k)
        if e is None:
            raise KeyError(key)
        return e.value

    def __len__(self) -> int:
        return self.root.key_count

    # -- mutations -------------------------------------------------------------

    def insert(self, key, value: int) -> bool:
        """Add a new key. Returns False (and changes nothing) for a duplicate."""
        return self._insert(as_key(key), value)

    def _insert(self, key: bytes, value: int) -> bool:
        hpt = self.hpt
        node = self.root
        path = []
        while True:
            slot = node.locate(key, hpt)
            path.append((node, slot))
            item = node.items[slot]
            t = type(item)
            if t is ModelNode:
                node = item
                continue
            if item is None:
                node.items[slot] = KvEntry(key, value)
            elif t is KvEntry:
                if item.key == key:
                    return False
                new = KvEntry(key, value)
                node.items[slot] = self._build_item([item, new] if item.key < key else [new, item])
            elif t is CompactNode:
                r = item.insert(key, value, self.w)
                if r is Status.DUPLICATE:
                    return False
                if r is Status.FULL:
                    entries = list(item.entries)
                    entries.insert(bisect_left(entries, key, key=_entry_key), KvEntry(key, value))
                    r = self._build_large(entries)
                node.items[slot] = r
            elif not item.insert(key, value):
                return False
            break
        self._writes += 1
        self._grow_path(path)
        return True

    def _grow_path(self, path: list) -> None:
        for node, _ in path:
            node.key_count += 1
        grow = self.config.resize_grow_trigger
        limit = self.config.collision_slot_limit
        for i, (node, slot) in enumerate(path):
            at = self._wrap_grow_at if i == 0 and self._wrapped else grow * len(node.items)
            if node.key_count >= at:
                self._rebuild(path, i)
                return
            child = node.items[slot]
            if type(child) is ModelNode:
                if child.key_count > node.heavy:
                    node.heavy = child.key_count
                if child.key_count > limit * node.key_count:
                    self._rebuild(path, i)
                    return

    def remove(self, key) -> bool:
        k = probe_key(key)
        if k is None:
            return False
        hpt = self.hpt
        node = self.root
        path = []
        while True:
            slot = node.locate(k, hpt)
            path.append((node, slot))
            item = node.items[slot]
            t = type(item)
            if t is ModelNode:
                node = item
                continue
            if item is None:
                return False
            if t is KvEntry:
                if item.key != k:
                    return False
                node.items[slot] = None
            elif t is CompactNode:
                r = item.delete(k)
                if r is Status.NOT_FOUND:
                    return False
                node.items[slot] = r
            else:
                if not item.delete(k):
                    return False
                if len(item) == 0:
                    node.items[slot] = None
            break
        self._writes += 1
        self._shrink_path(path)
        return True

    delete = remove

    def _shrink_path(self, path: list) -> None:
        for node, _ in path:
            node.key_count -= 1
        shrink = self.config.resize_shrink_trigger
        limit = self.config.collision_slot_limit
        for i, (node, _) in enumerate(path):
            if i == 0 and self._wrapped:
                small = node.key_count < self._wrap_shrink_at
            else:
                small = node.key_count < shrink * len(node.items) and len(node.items) > 4
            if small:
                self._rebuild(path, i)
                return
            if node.heavy > limit * node.key_count:
                node.heavy = max((c.key_count for c in node.items if type(c) is ModelNode), default=0)
                if node.heavy > limit * node.key_count and not (i == 0 and self._wrapped):
                    self._rebuild(path, i)
                    return

    def update(self, key, value: int) -> bool:
        k = probe_key(key)
        e = None if k is None else self._find(k)
        if e is None:
            return False
        e.value = value
        self._writes += 1
        return True

    def upsert(self, key, value: int) -> bool:
        """Update in place or insert; True when a new key was added."""
        if self.update(key, value):
            return False
        return self.insert(key, value)

    def _rebuild(self, path: list, i: int) -> None:
        node = path[i][0]
        entries = list(iter_entries(node))
        self.resizes += 1
        self.resize_work += len(entries)
        if i == 0:
            self.root = self._build_root(entries)
            return
        parent, pslot = path[i - 1]
        child = self._build_item(entries, parent.key_count)
        parent.items[pslot] = child
        if type(child) is ModelNode and child.key_count > parent.heavy:
            parent.heavy = child.key_count

    def rebuild(self, retrain: bool = True) -> None:
        """Rebuild everything from the live keys, optionally retraining the HPT."""
        entries = list(iter_entries(self.root))
        if retrain and entries:
            self.hpt = Hpt.from_keys([e.key for e in entries], self.config.hpt)
        self.resizes += 1
        self.resize_work += len(entries)
        self.root = self._build_root(entries)

    def sync_workload_mix(self) -> None:
        """Feed the read/write counters since the last call to the performance model."""
        self.pmss.observe(reads=self._reads, writes=self._writes)
        self._reads = 0
        self._writes = 0

    # -- scans -----------------------------------------------------------------

    def scan(self, start=None) -> "ScanIterator":
        """Entries with key >= ``start`` in key order, as (key, value) pairs."""
        start = as_key(start) if start else None
        return ScanIterator(self, start)

    def range(self, start=None, count: int | None = None) -> list[tuple[bytes, int]]:
        it = self.scan(start)
        if count is None:
            return list(it)
        out = []
        for kv in it:
            if len(out) >= count:
                break
            out.append(kv)
        return out

    def items(self) -> Iterator[tuple[bytes, int]]:
        return self.scan(None)

    def keys(self) -> Iterator[bytes]:
        return (k for k, _ in self.scan(None))

    __iter__ = keys

    # -- introspection -----------------------------------------------------------

    def stats(self) -> IndexStats:
        base: list[int] = []
        sub: list[int] = []
        counts = {"model": 0, "cnode": 0, "subtrie": 0, "single": 0, "empty": 0,
                  "trie4": 0, "trie16": 0, "trie48": 0, "trie256": 0}
        sizes = {"hpt": self.hpt.config.table_bytes, "model": 0, "cnode": 0, "subtrie": 0, "entries": 0}
        stack = [(self.root, 1)]
        while stack:
            node, level = stack.pop()
            counts["model"] += 1
            sizes["model"] += node.nbytes()
            for item in node.items:
                t = type(item)
                if item is None:
                    counts["empty"] += 1
                elif t is KvEntry:
                    counts["single"] += 1
                    base.append(level)
                    sub.append(0)
                    sizes["entries"] += KV_HEADER_BYTES + len(item.key)
                elif t is ModelNode:
                    stack.append((item, level + 1))
                elif t is CompactNode:
                    counts["cnode"] += 1
                    sizes["cnode"] += item.nbytes()
                    for e in item.entries:
                        base.append(level + 1)
                        sub.append(0)
                        sizes["entries"] += KV_HEADER_BYTES + len(e.key)
                else:
                    counts["subtrie"] += 1
                    sizes["subtrie"] += item.nbytes()
                    for kind, c in item.node_counts().items():
                        counts[f"trie{kind}"] += c
                    for d in item.key_depths():
                        base.append(level)
                        sub.append(d)
                    for e in item.iter_entries():
                        sizes["entries"] += KV_HEADER_BYTES + len(e.key)
        n = len(base)
        in_sub = [d for d in sub if d]
        return IndexStats(
            key_count=self.root.key_count,
            avg_base_height=sum(base) / n if n else 0.0,
            max_base_height=max(base, default=0),
            avg_subtrie_height=sum(sub) / n if n else 0.0,
            avg_height_in_subtries=sum(in_sub) / len(in_sub) if in_sub else 0.0,
            max_subtrie_height=max(sub, default=0),
            node_counts=counts,
            bytes_used=sum(sizes.values()),
            bytes_breakdown=sizes,
        )

    def check_invariants(self) -> None:
        """Full-walk audit; raises :class:`InvariantError` on the first violation.

        Checks key order across the whole tree, key counts, compact node shape,
        the slot-placement of every key and the 50% rule.
        """
        limit = self.config.collision_slot_limit
        hpt = self.hpt

        def walk(node: ModelNode, is_root: bool) -> list[bytes]:
            if len(node.items) < 4:
                raise InvariantError(f"{node!r}: item array shorter than 4")
            keys: list[bytes] = []
            for slot, item in enumerate(node.items):
                t = type(item)
                if item is None:
                    continue
                if t is KvEntry:
                    sub = [item.key]
                elif t is CompactNode:
                    if not 2 <= len(item) <= max(self.w, 2):
                        raise InvariantError(f"compact node with {len(item)} entries")
                    sub = [e.key for e in item.entries]
                elif t is ModelNode:
                    sub = walk(item, False)
                    if item.key_count > limit * node.key_count and not (is_root and self._wrapped):
                        raise InvariantError(
                            f"50% rule: child at slot {slot} holds {item.key_count} of {node.key_count} keys")
                else:
                    sub = item.keys()
                    if len(sub) != len(item):
                        raise InvariantError("subtrie count mismatch")
                    if not sub:
                        raise InvariantError("empty subtrie left in a slot")
                for k in sub:
                    if node.locate(k, hpt) != slot:
                        raise InvariantError(f"key {k!r} stored in slot {slot}, locates elsewhere")
                keys.extend(sub)
            if keys != sorted(keys) or len(set(keys)) != len(keys):
                raise InvariantError(f"{node!r}: keys out of order")
            if len(keys) != node.key_count:
                raise InvariantError(f"{node!r}: key_count {node.key_count} != {len(keys)}")
            return keys

        walk(self.root, True)

    def non_subtrie_height(self) -> int:
        """Longest chain of model nodes plus a compact node level."""
        def h(node: ModelNode) -> int:
            best = 1
            for item in node.items:
                t = type(item)
                if t is ModelNode:
                    best = max(best, 1 + h(item))
                elif t is CompactNode:
                    best = max(best, 2)
            return best
        return h(self.root)

    def sample_latency(self, probes: Sequence, repeat: int = 1) -> float:
        """Mean lookup latency in ns over ``probes``."""
        if not probes:
            raise ValueError("no probe keys")
        keys = [as_key(k) for k in probes]
        find = self._find
        t0 = time.perf_counter_ns()
        for _ in range(repeat):
            for k in keys:
                find(k)
        return (time.perf_counter_ns() - t0) / (len(keys) * repeat)


class ScanIterator:
    """Ordered iterator over (key, value) pairs from a start key.

    Holds a stack of ``[node, position]`` frames from the root down to the
    current leaf; leaves (compact nodes and subtries) are drained through a
    nested iterator.
    """

    __slots__ = ("_stack", "_leaf")

    def __init__(self, index: LitsIndex, start: bytes | None):
        self._stack: list[list] = []
        self._leaf: Iterator[KvEntry] | None = None
        if start is None:
            self._stack.append([index.root, -1])
            return
        hpt = index.hpt
        node = index.root
        while True:
            slot = node.locate(start, hpt)
            self._stack.append([node, slot])
            item = node.items[slot]
            if type(item) is ModelNode:
                node = item
                continue
            break
        t = type(item)
        if item is None:
            return
        if t is KvEntry:
            if item.key >= start:
                self._leaf = iter((item,))
        elif t is CompactNode:
            entries = item.entries
            self._leaf = iter(entries[bisect_left(entries, start, key=_entry_key):])
        else:
            self._leaf = item.iter_from(start)

    def __iter__(self):
        return self

    def __next__(self) -> tuple[bytes, int]:
        stack = self._stack
        while True:
            leaf = self._leaf
            if leaf is not None:
                e = next(leaf, None)
                if e is not None:
                    return e.key, e.value
                self._leaf = None
            if not stack:
                raise StopIteration
            frame = stack[-1]
            items = frame[0].items
            pos = frame[1] + 1
            n = len(items)
            while pos < n and items[pos] is None:
                pos += 1
            if pos >= n:
                stack.pop()
                continue
            frame[1] = pos
            item = items[pos]
            t = type(item)
            if t is KvEntry:
                return item.key, item.value
            if t is ModelNode:
                stack.append([item, -1])
            elif t is CompactNode:
                self._leaf = iter(item.entries)
            else:
                self._leaf = item.iter_from(None)

    def take(self, count: int) -> list[tuple[bytes, int]]:
        out = []
        for kv in self:
            out.append(kv)
            if len(out) >= count:
                break
        return out


class StalenessMonitor:
    """Tracks sampled lookup latency against the post-bulkload baseline.

    Signals a rebuild once sampled throughput drops below ``watermark`` x the
    baseline, e.g. after the key distribution drifted away from the HPT.
    """

    def __init__(self, index: LitsIndex, probes: Sequence, watermark: float = 0.5,
                 sample_rate: float = 0.01, seed: int = 0):
        self.index = index
        self.probes = list(probes)
        self.watermark = watermark
        self.sample_rate = sample_rate
        self._rng = random.Random(seed)
        self.baseline = index.sample_latency(self.probes)

    def tick(self) -> bool:
        """Call once per operation; returns True when a rebuild is due."""
        if self._rng.random() >= self.sample_rate:
            return False
        return should_rebuild(self.index.sample_latency(self.probes), self.baseline, self.watermark)

    def rebuild(self) -> None:
        self.index.rebuild(retrain=True)
        self.baseline = self.index.sample_latency(self.probes)


def expected_height_bound(n: int, slack: int = 4) -> int:
    return math.ceil(math.log2(max(n, 2))) + slack


def with_config(config: LitsConfig, **changes) -> LitsConfig:
    return replace(config, **changes)
