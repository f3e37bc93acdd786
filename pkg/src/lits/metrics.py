"""Hardness and model-quality metrics for string key sets.

* ``cpl``: common prefix length of a list of strings.
* ``pkl`` / ``gpkl`` / ``local_gpkl``: partial key lengths and their group
  average. For a sorted list the partial key of the i-th string is
  ``max(cpl(S[i-1], S[i]), cpl(S[i], S[i+1])) + 1 - cpl(L)``; the first and
  last strings only have one neighbour.
* ``prefix_skew_ratio``: distinct k-byte prefixes over total keys.
* ``unique_rate``: fraction of keys a CDF model sends to distinct slots of an
  array scaled by ``SF``.
* ``sm_encode``: the positional base-256 fraction used by SLIPP-style linear
  models, kept as a baseline.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

_VECTOR_MIN = 512


def cpl_pair(a: bytes, b: bytes) -> int:
    n = min(len(a), len(b))
    if a[:n] == b[:n]:
        return n
    lo, hi = 0, n
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if a[:mid] == b[:mid]:
            lo = mid
        else:
            hi = mid
    return lo


def cpl(strings: Sequence[bytes]) -> int:
    """Longest prefix shared by every string; a lone string is its own prefix."""
    if not strings:
        raise ValueError("cpl of an empty list")
    lo = min(strings)
    hi = max(strings)
    return cpl_pair(lo, hi)


def adjacent_cpls(keys: Sequence[bytes]) -> np.ndarray:
    """``cpl(keys[i], keys[i+1])`` for every adjacent pair."""
    n = len(keys)
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    if n < _VECTOR_MIN:
        return np.array([cpl_pair(keys[i], keys[i + 1]) for i in range(n - 1)], dtype=np.int64)
    out = np.empty(n - 1, dtype=np.int64)
    chunk = 1 << 15
    for lo in range(0, n - 1, chunk):
        block = keys[lo:min(lo + chunk + 1, n)]
        lens = np.fromiter((len(k) for k in block), dtype=np.int64, count=len(block))
        width = int(lens.max())
        buf = b"".join(k.ljust(width, b"\0") for k in block)
        mat = np.frombuffer(buf, dtype=np.uint8).reshape(len(block), width)
        diff = mat[1:] != mat[:-1]
        first = np.where(diff.any(axis=1), diff.argmax(axis=1), width)
        out[lo:lo + len(block) - 1] = np.minimum(first, np.minimum(lens[1:], lens[:-1]))
    return out


def _pkl_terms(adj: np.ndarray) -> np.ndarray:
    """``max(left, right) + 1`` per element, single-neighbour at the ends."""
    left = np.concatenate(([-1], adj))
    right = np.concatenate((adj, [-1]))
    return np.maximum(left, right) + 1


def pkl(sorted_keys: Sequence[bytes], i: int) -> int:
    n = len(sorted_keys)
    if n < 2:
        raise ValueError("pkl needs a list of at least 2 strings")
    if not 0 <= i < n:
        raise IndexError(f"index {i} outside [0, {n})")
    s = sorted_keys[i]
    best = 0
    if i > 0:
        best = cpl_pair(sorted_keys[i - 1], s)
    if i < n - 1:
        best = max(best, cpl_pair(s, sorted_keys[i + 1]))
    return best + 1 - cpl(sorted_keys)


def pkl_all(sorted_keys: Sequence[bytes]) -> np.ndarray:
    if len(sorted_keys) < 2:
        raise ValueError("need at least 2 strings")
    adj = adjacent_cpls(sorted_keys)
    return _pkl_terms(adj) - int(adj.min())


def gpkl(sorted_keys: Sequence[bytes]) -> float:
    return float(pkl_all(sorted_keys).mean())


def local_gpkl(sorted_keys: Sequence[bytes], g: int = 32) -> float:
    """Mean of per-sublist gpkl over disjoint runs of ``g`` consecutive strings.

    A trailing run of a single string is folded into the run before it.
    """
    n = len(sorted_keys)
    if n < 2:
        raise ValueError("need at least 2 strings")
    if g < 2:
        raise ValueError("group size must be >= 2")
    bounds = list(range(0, n, g)) + [n]
    if bounds[-1] - bounds[-2] == 1 and len(bounds) > 2:
        del bounds[-2]
    adj = adjacent_cpls(sorted_keys)
    vals = []
    for lo, hi in zip(bounds, bounds[1:]):
        sub = adj[lo:hi - 1]
        vals.append(float((_pkl_terms(sub) - int(sub.min())).mean()))
    return float(np.mean(vals))


def prefix_skew_ratio(keys: Iterable[bytes], k: int) -> float:
    """Distinct k-byte prefixes divided by the number of keys.

    Keys shorter than ``k`` contribute themselves as their prefix.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    keys = list(keys)
    if not keys:
        raise ValueError("empty key set")
    return len({s[:k] for s in keys}) / len(keys)


def sm_encode(s: bytes | str) -> float:
    """``s1/256 + s2/256**2 + ...`` evaluated by Horner's rule."""
    if isinstance(s, str):
        s = s.encode("ascii")
    x = 0.0
    for c in reversed(s):
        x = (x + c) / 256.0
    return x


def unique_rate(model: Callable[[bytes], float] | np.ndarray, keys: Sequence[bytes],
                sf: float = 1.0) -> float:
    """Occupied slots over |keys| when ``model`` maps keys into ``sf * |keys|`` slots."""
    if sf < 1:
        raise ValueError("scale factor must be >= 1")
    n = len(keys)
    if n == 0:
        raise ValueError("empty key set")
    if callable(model):
        cdfs = np.fromiter((model(k) for k in keys), dtype=np.float64, count=n)
    else:
        cdfs = np.asarray(model, dtype=np.float64)
    size = max(int(round(sf * n)), 1)
    slots = np.clip(np.floor(cdfs * size), 0, size - 1).astype(np.int64)
    return len(np.unique(slots)) / n
