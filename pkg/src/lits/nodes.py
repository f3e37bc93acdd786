"""Structural elements of the index: items, kv-entries, compact and model nodes.

In memory an item slot simply holds a Python object and its type is the node
tag: ``None`` (empty), :class:`KvEntry` (single entry), :class:`CompactNode`,
:class:`ModelNode` or a :class:`~lits.subtrie.Subtrie`. :func:`pack_item`
documents the 64-bit word those slots stand for (3-bit tag, 16-bit aux,
45-bit reference) and is what the space accounting charges per slot.
"""

from __future__ import annotations

import enum
import zlib
from bisect import bisect_left
from operator import attrgetter
from typing import Callable, Iterator, Sequence

import numpy as np

from .hpt import Hpt
from .metrics import cpl_pair

TAG_BITS = 3
AUX_BITS = 16
REF_BITS = 45
ITEM_BYTES = 8
HPOINTER_BYTES = 8
MODEL_HEADER_BYTES = 40
CNODE_HEADER_BYTES = 8
KV_HEADER_BYTES = 9


class NodeTag(enum.IntEnum):
    EMPTY = 0
    SINGLE_ENTRY = 1
    COMPACT_LEAF = 2
    MODEL_NODE = 3
    SUBTRIE = 4


def pack_item(tag: NodeTag, aux: int, ref: int) -> int:
    if not 0 <= aux < 1 << AUX_BITS:
        raise ValueError("aux does not fit in 16 bits")
    if not 0 <= ref < 1 << REF_BITS:
        raise ValueError("ref does not fit in 45 bits")
    if tag == NodeTag.EMPTY and ref:
        raise ValueError("empty items carry a null reference")
    return (int(tag) << (AUX_BITS + REF_BITS)) | (aux << REF_BITS) | ref


def unpack_item(word: int) -> tuple[NodeTag, int, int]:
    ref = word & ((1 << REF_BITS) - 1)
    aux = (word >> REF_BITS) & ((1 << AUX_BITS) - 1)
    tag = NodeTag(word >> (AUX_BITS + REF_BITS))
    return tag, aux, ref


class Status(enum.Enum):
    FULL = "full"
    DUPLICATE = "duplicate"
    NOT_FOUND = "not-found"


class KvEntry:
    __slots__ = ("key", "value")

    def __init__(self, key: bytes, value: int):
        self.key = key
        self.value = value

    def __repr__(self):
        return f"KvEntry({self.key!r}, {self.value})"


def fingerprint16(key: bytes) -> int:
    # CRC-32 folded to 16 bits; unrelated to the FNV prefix hash of the HPT
    h = zlib.crc32(key)
    return (h ^ (h >> 16)) & 0xFFFF


_entry_key = attrgetter("key")


class CompactNode:
    """Sorted array of (fingerprint, entry) pairs.

    The default variant reallocates on every insert so the array is exactly
    ``k`` long. With ``reserved`` set the node keeps that many slots and
    inserts shift in place, which only changes the space charged.
    """

    __slots__ = ("fps", "entries", "reserved")

    derefs = 0

    def __init__(self, entries: Sequence[KvEntry], reserved: int = 0):
        self.entries = list(entries)
        self.fps = [fingerprint16(e.key) for e in self.entries]
        self.reserved = reserved

    @classmethod
    def _raw(cls, fps, entries, reserved):
        node = cls.__new__(cls)
        node.fps = fps
        node.entries = entries
        node.reserved = reserved
        return node

    def __len__(self):
        return len(self.entries)

    def find(self, key: bytes) -> KvEntry | None:
        fps = self.fps
        fp = fingerprint16(key)
        i = -1
        n = len(fps)
        while True:
            i += 1
            while i < n and fps[i] != fp:
                i += 1
            if i >= n:
                return None
            CompactNode.derefs += 1
            e = self.entries[i]
            if e.key == key:
                return e

    def search(self, key: bytes):
        e = self.find(key)
        return None if e is None else e.value

    def insert(self, key: bytes, value: int, capacity: int):
        entries = self.entries
        pos = bisect_left(entries, key, key=_entry_key)
        if pos < len(entries) and entries[pos].key == key:
            return Status.DUPLICATE
        if len(entries) >= capacity:
            return Status.FULL
        entry = KvEntry(key, value)
        if self.reserved:
            entries.insert(pos, entry)
            self.fps.insert(pos, fingerprint16(key))
            return self
        fps = self.fps
        return CompactNode._raw(fps[:pos] + [fingerprint16(key)] + fps[pos:],
                                entries[:pos] + [entry] + entries[pos:], 0)

    def delete(self, key: bytes):
        entries = self.entries
        pos = bisect_left(entries, key, key=_entry_key)
        if pos >= len(entries) or entries[pos].key != key:
            return Status.NOT_FOUND
        if len(entries) == 2:
            return entries[1 - pos]
        if self.reserved:
            del entries[pos]
            del self.fps[pos]
            return self
        return CompactNode._raw(self.fps[:pos] + self.fps[pos + 1:],
                                entries[:pos] + entries[pos + 1:], 0)

    def nbytes(self) -> int:
        slots = max(self.reserved, len(self.entries))
        return CNODE_HEADER_BYTES + HPOINTER_BYTES * slots

    def __repr__(self):
        return f"CompactNode({[e.key for e in self.entries]})"


class ModelNode:
    """Inner node addressed by the HPT plus a per-node linear model.

    Slots ``1 .. len-2`` hold keys sharing ``prefix`` in key order; slot 0 and
    the last slot catch keys whose leading bytes sort below/above the prefix.
    """

    __slots__ = ("prefix", "alpha", "beta", "items", "key_count", "heavy")

    def __init__(self, prefix: bytes, alpha: float, beta: float, items: list, key_count: int):
        self.prefix = prefix
        self.alpha = alpha
        self.beta = beta
        self.items = items
        self.key_count = key_count
        # upper bound on key_count over ModelNode children (50% rule bookkeeping)
        self.heavy = 0

    def locate(self, key: bytes, hpt: Hpt) -> int:
        items = self.items
        p = self.prefix
        if p and not key.startswith(p):
            return 0 if key[:len(p)] < p else len(items) - 1
        n = len(items)
        pos = int((self.alpha * hpt.cdf_at(key, len(p)) + self.beta) * n)
        if pos < 1:
            return 1
        if pos > n - 2:
            return n - 2
        return pos

    def predict(self, x: float) -> int:
        """Slot for a raw model input; mirrors the clamp in :meth:`locate`."""
        n = len(self.items)
        pos = int((self.alpha * x + self.beta) * n)
        return min(max(pos, 1), n - 2)

    def nbytes(self) -> int:
        return MODEL_HEADER_BYTES + len(self.prefix) + ITEM_BYTES * len(self.items)

    def __repr__(self):
        return f"ModelNode(prefix={self.prefix!r}, len={len(self.items)}, keys={self.key_count})"


def array_len_for(n: int) -> int:
    return max(4, 2 * n + 2)


def fit_linear(xmin: float, xmax: float, length: int) -> tuple[float, float]:
    """Min-max scale ``[xmin, xmax]`` onto slots ``1 .. length-2``."""
    if xmax > xmin:
        alpha = (length - 2) * (1.0 - 1e-9) / ((xmax - xmin) * length)
        beta = 1.0 / length - alpha * xmin
        return alpha, beta
    return 0.0, 1.5 / length


def slot_positions(node: ModelNode, xs: np.ndarray) -> np.ndarray:
    n = len(node.items)
    pos = np.floor((node.alpha * xs + node.beta) * n)
    return np.clip(pos, 1, n - 2).astype(np.int64)


_VECTOR_MIN = 64


def build_model_node(entries: Sequence[KvEntry], hpt: Hpt, build_child: Callable[[list, int], object],
                     prefix_base: int = 0) -> ModelNode:
    """Build a model node over sorted, distinct ``entries``.

    ``build_child(group, n)`` turns every multi-key slot into a child item;
    ``n`` is the node's total so the caller can apply the 50% rule.
    """
    n = len(entries)
    if n < 2:
        raise ValueError("a model node needs at least 2 entries")
    keys = [e.key for e in entries]
    plen = cpl_pair(keys[0], keys[-1])
    prefix = keys[0][:plen]
    length = array_len_for(n)
    if n >= _VECTOR_MIN:
        xs = hpt.cdf_many(keys, plen)
    else:
        xs = np.array([hpt.cdf_at(k, plen) for k in keys])
    alpha, beta = fit_linear(float(xs.min()), float(xs.max()), length)
    node = ModelNode(prefix, alpha, beta, [None] * length, n)
    if n >= _VECTOR_MIN:
        pos = slot_positions(node, xs).tolist()
    else:
        pos = [node.predict(x) for x in xs.tolist()]
    _fill_slots(node, entries, pos, build_child)
    return node


def build_wrapper_node(entries: Sequence[KvEntry], build_child: Callable[[list, int], object]) -> ModelNode:
    """Root stand-in that routes every key to slot 1; always the minimum four slots."""
    n = len(entries)
    length = array_len_for(1)
    alpha, beta = fit_linear(0.0, 0.0, length)
    node = ModelNode(b"", alpha, beta, [None] * length, n)
    if n == 1:
        node.items[1] = entries[0]
    elif n > 1:
        node.items[1] = build_child(list(entries), n)
        _note_heavy(node, node.items[1])
    return node


def _note_heavy(node: ModelNode, child) -> None:
    if type(child) is ModelNode and child.key_count > node.heavy:
        node.heavy = child.key_count


def _fill_slots(node: ModelNode, entries: Sequence[KvEntry], pos: list, build_child) -> None:
    items = node.items
    n = len(entries)
    i = 0
    while i < n:
        p = pos[i]
        j = i + 1
        while j < n and pos[j] == p:
            j += 1
        if j - i == 1:
            items[p] = entries[i]
        else:
            child = build_child(list(entries[i:j]), n)
            items[p] = child
            _note_heavy(node, child)
        i = j


def iter_entries(item) -> Iterator[KvEntry]:
    """In-order kv-entries beneath any item."""
    t = type(item)
    if item is None:
        return
    if t is KvEntry:
        yield item
    elif t is CompactNode:
        yield from item.entries
    elif t is ModelNode:
        for child in item.items:
            if child is not None:
                yield from iter_entries(child)
    else:
        yield from item.iter_entries()


def render(item, indent: int = 0, max_depth: int = 6) -> str:
    """Indented dump of a subtree for debugging."""
    pad = "  " * indent
    t = type(item)
    if item is None:
        return f"{pad}-\n"
    if t is KvEntry:
        return f"{pad}{item.key!r}\n"
    if t is CompactNode:
        return f"{pad}cnode[{len(item)}] {item.entries[0].key!r}..{item.entries[-1].key!r}\n"
    if t is ModelNode:
        out = [f"{pad}model prefix={item.prefix!r} len={len(item.items)} keys={item.key_count}\n"]
        if indent >= max_depth:
            return out[0]
        for i, child in enumerate(item.items):
            if child is not None:
                out.append(f"{pad}  [{i}]\n")
                out.append(render(child, indent + 2, max_depth))
        return "".join(out)
    return f"{pad}subtrie[{len(item)}]\n"
