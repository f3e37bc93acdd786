"""Adaptive radix trie used for key subsets the learned nodes handle poorly.

Inner nodes branch on one byte and compress single-child paths into a
``prefix``. Fanout storage adapts with the number of children, as in ART:

* up to 4 or 16 children: sorted key bytes plus a parallel child list
* up to 48: a 256-entry byte index into a 48-slot child list
* beyond: a direct 256-slot child list

A key that ends exactly at an inner node is held in that node's ``leaf``.
Deletes do not restructure the trie; they go to a delete list that lookups
consult, and the trie is rebuilt from live keys once the list grows past
``delete_ratio_limit`` of the live count.
"""

from __future__ import annotations

from bisect import bisect_left
from typing import Iterator, Sequence

from .metrics import cpl_pair
from .nodes import KvEntry

NODE_BYTES = {4: 52, 16: 160, 48: 656, 256: 2064}


class _Node:
    __slots__ = ("prefix", "leaf", "kind", "keys", "children", "index")

    def __init__(self, prefix: bytes):
        self.prefix = prefix
        self.leaf = None
        self.kind = 4
        self.keys = bytearray()
        self.children = []
        self.index = None

    def child(self, b: int):
        k = self.kind
        if k <= 16:
            i = self.keys.find(b)
            return self.children[i] if i >= 0 else None
        if k == 48:
            i = self.index[b]
            return self.children[i - 1] if i else None
        return self.children[b]

    def set_child(self, b: int, child) -> None:
        k = self.kind
        if k <= 16:
            self.children[self.keys.find(b)] = child
        elif k == 48:
            self.children[self.index[b] - 1] = child
        else:
            self.children[b] = child

    def add_child(self, b: int, child) -> None:
        k = self.kind
        if k <= 16:
            if len(self.keys) == k:
                self._grow()
                return self.add_child(b, child)
            i = bisect_left(self.keys, b)
            self.keys.insert(i, b)
            self.children.insert(i, child)
        elif k == 48:
            if len(self.children) == 48:
                self._grow()
                return self.add_child(b, child)
            self.children.append(child)
            self.index[b] = len(self.children)
        else:
            self.children[b] = child

    def _grow(self) -> None:
        pairs = list(self.items())
        self._assign(pairs)
        if self.kind == 4:
            self.kind = 16
        elif self.kind == 16:
            self._to48(pairs)
        else:
            self._to256(pairs)

    def _assign(self, pairs) -> None:
        self.keys = bytearray(b for b, _ in pairs)
        self.children = [c for _, c in pairs]
        self.index = None

    def _to48(self, pairs) -> None:
        self.kind = 48
        self.keys = None
        self.index = bytearray(256)
        self.children = []
        for b, c in pairs:
            self.children.append(c)
            self.index[b] = len(self.children)

    def _to256(self, pairs) -> None:
        self.kind = 256
        self.keys = None
        self.index = None
        self.children = [None] * 256
        for b, c in pairs:
            self.children[b] = c

    def items(self):
        """(byte, child) pairs in byte order."""
        k = self.kind
        if k <= 16:
            return zip(self.keys, self.children)
        if k == 48:
            idx = self.index
            ch = self.children
            return ((b, ch[idx[b] - 1]) for b in range(256) if idx[b])
        return ((b, c) for b, c in enumerate(self.children) if c is not None)

    @classmethod
    def from_pairs(cls, prefix: bytes, pairs: list) -> "_Node":
        node = cls(prefix)
        n = len(pairs)
        if n <= 16:
            node.kind = 4 if n <= 4 else 16
            node._assign(pairs)
        elif n <= 48:
            node._to48(pairs)
        else:
            node._to256(pairs)
        return node


def _build(entries: Sequence[KvEntry], keys: Sequence[bytes], lo: int, hi: int, depth: int):
    if hi - lo == 1:
        return entries[lo]
    first = keys[lo]
    c = cpl_pair(first, keys[hi - 1])
    prefix = first[depth:c]
    leaf = None
    i = lo
    if len(first) == c:
        leaf = entries[lo]
        i += 1
    pairs = []
    stem = first[:c]
    while i < hi:
        b = keys[i][c]
        j = bisect_left(keys, stem + bytes((b + 1,)), i, hi) if b < 255 else hi
        pairs.append((b, _build(entries, keys, i, j, c + 1)))
        i = j
    node = _Node.from_pairs(prefix, pairs)
    node.leaf = leaf
    return node


def _iter(node, depth: int, start: bytes | None) -> Iterator[KvEntry]:
    if type(node) is KvEntry:
        if start is None or node.key >= start:
            yield node
        return
    p = node.prefix
    if start is not None and p:
        seg = start[depth:depth + len(p)]
        if seg < p:
            start = None
        elif seg > p:
            return
    depth += len(p)
    if start is not None and len(start) == depth:
        start = None
    if node.leaf is not None and start is None:
        yield node.leaf
    if start is None:
        for _, child in node.items():
            yield from _iter(child, depth + 1, None)
        return
    sb = start[depth]
    for b, child in node.items():
        if b < sb:
            continue
        if b == sb:
            yield from _iter(child, depth + 1, start)
        else:
            yield from _iter(child, depth + 1, None)


class Subtrie:
    __slots__ = ("root", "count", "deleted", "delete_ratio_limit", "rebuilds")

    def __init__(self, delete_ratio_limit: float = 0.25):
        self.root = None
        self.count = 0
        self.deleted: set[bytes] = set()
        self.delete_ratio_limit = delete_ratio_limit
        self.rebuilds = 0

    @classmethod
    def bulkload(cls, entries: Sequence[KvEntry], delete_ratio_limit: float = 0.25) -> "Subtrie":
        """Build from entries sorted by key with no duplicates."""
        t = cls(delete_ratio_limit)
        t._load(list(entries))
        return t

    def _load(self, entries: list) -> None:
        self.count = len(entries)
        self.deleted = set()
        if entries:
            keys = [e.key for e in entries]
            self.root = _build(entries, keys, 0, len(entries), 0)
        else:
            self.root = None

    def __len__(self):
        return self.count

    def _find_physical(self, key: bytes) -> KvEntry | None:
        node = self.root
        depth = 0
        n = len(key)
        while node is not None:
            if type(node) is KvEntry:
                return node if node.key == key else None
            p = node.prefix
            if p:
                if key[depth:depth + len(p)] != p:
                    return None
                depth += len(p)
            if depth == n:
                return node.leaf
            node = node.child(key[depth])
            depth += 1
        return None

    def find(self, key: bytes) -> KvEntry | None:
        e = self._find_physical(key)
        if e is not None and self.deleted and key in self.deleted:
            return None
        return e

    def search(self, key: bytes):
        e = self.find(key)
        return None if e is None else e.value

    def update(self, key: bytes, value: int) -> bool:
        e = self.find(key)
        if e is None:
            return False
        e.value = value
        return True

    def insert(self, key: bytes, value: int) -> bool:
        """Insert a new key; False if it is already live."""
        if self.deleted and key in self.deleted:
            self.deleted.discard(key)
            self._find_physical(key).value = value
            self.count += 1
            return True
        if self._insert_physical(key, KvEntry(key, value)):
            self.count += 1
            return True
        return False

    def insert_entry(self, entry: KvEntry) -> bool:
        if self.deleted and entry.key in self.deleted:
            return self.insert(entry.key, entry.value)
        if self._insert_physical(entry.key, entry):
            self.count += 1
            return True
        return False

    def _insert_physical(self, key: bytes, entry: KvEntry) -> bool:
        node = self.root
        if node is None:
            self.root = entry
            return True
        parent = None
        pb = 0
        depth = 0
        n = len(key)
        while True:
            if type(node) is KvEntry:
                other = node.key
                if other == key:
                    return False
                c = cpl_pair(other, key)
                new = _Node(key[depth:c])
                for k, e in ((other, node), (key, entry)):
                    if len(k) == c:
                        new.leaf = e
                    else:
                        new.add_child(k[c], e)
                self._replace(parent, pb, new)
                return True
            p = node.prefix
            lp = len(p)
            if lp:
                seg = key[depth:depth + lp]
                if seg != p:
                    m = cpl_pair(seg, p)
                    new = _Node(p[:m])
                    node.prefix = p[m + 1:]
                    new.add_child(p[m], node)
                    if depth + m == n:
                        new.leaf = entry
                    else:
                        new.add_child(key[depth + m], entry)
                    self._replace(parent, pb, new)
                    return True
                depth += lp
            if depth == n:
                if node.leaf is not None:
                    return False
                node.leaf = entry
                return True
            b = key[depth]
            child = node.child(b)
            if child is None:
                node.add_child(b, entry)
                return True
            parent, pb, node = node, b, child
            depth += 1

    def _replace(self, parent, b, new) -> None:
        if parent is None:
            self.root = new
        else:
            parent.set_child(b, new)

    def delete(self, key: bytes) -> bool:
        if self.find(key) is None:
            return False
        self.deleted.add(key)
        self.count -= 1
        if len(self.deleted) > self.delete_ratio_limit * self.count:
            self.rebuild()
        return True

    def rebuild(self) -> None:
        self.rebuilds += 1
        self._load(list(self.iter_entries()))

    def iter_from(self, start: bytes | None = None) -> Iterator[KvEntry]:
        """Live entries with key >= ``start`` in key order."""
        if self.root is None:
            return iter(())
        it = _iter(self.root, 0, start)
        if not self.deleted:
            return it
        dead = self.deleted
        return (e for e in it if e.key not in dead)

    def iter_entries(self) -> Iterator[KvEntry]:
        return self.iter_from(None)

    def keys(self) -> list[bytes]:
        return [e.key for e in self.iter_entries()]

    # -- shape ---------------------------------------------------------------

    def _walk(self, node, level: int, out: list) -> None:
        if type(node) is KvEntry:
            if not self.deleted or node.key not in self.deleted:
                out.append(level)
            return
        if node.leaf is not None and (not self.deleted or node.leaf.key not in self.deleted):
            out.append(level)
        for _, child in node.items():
            self._walk(child, level + 1, out)

    def key_depths(self) -> list[int]:
        """Nodes visited to reach each live key, counting the inner node (or
        bare entry) where the key is found."""
        out: list[int] = []
        if self.root is not None:
            self._walk(self.root, 1, out)
        return out

    def height(self) -> int:
        """Levels on the longest root-to-key path, counting the entry level."""
        def h(node) -> int:
            if type(node) is KvEntry:
                return 1
            sub = [h(c) for _, c in node.items()]
            return 1 + max(sub) if sub else 1
        return 0 if self.root is None else h(self.root)

    def node_counts(self) -> dict[int, int]:
        counts = {4: 0, 16: 0, 48: 0, 256: 0}
        stack = [self.root] if self.root is not None else []
        while stack:
            node = stack.pop()
            if type(node) is KvEntry:
                continue
            counts[node.kind] += 1
            stack.extend(c for _, c in node.items())
        return counts

    def nbytes(self) -> int:
        """Modelled size of inner nodes plus the delete list (entries excluded)."""
        total = 16 + 8 * len(self.deleted)
        stack = [self.root] if self.root is not None else []
        while stack:
            node = stack.pop()
            if type(node) is KvEntry:
                continue
            total += NODE_BYTES[node.kind] + len(node.prefix) + (8 if node.leaf is not None else 0)
            stack.extend(c for _, c in node.items())
        return total
