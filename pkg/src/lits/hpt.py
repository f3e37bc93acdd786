"""Hash-enhanced Prefix Table: a global CDF model for ASCII strings.

Every (prefix, next byte) pair seen in a sample of keys is counted in a 2-D
table whose row is a hash of the prefix and whose column is the byte. After
per-row normalisation each cell holds the conditional probability of the byte
given the (hashed) prefix, plus the exclusive prefix sum of those
probabilities. The CDF of a string is then accumulated byte by byte::

    cdf  += prob * cell.cdf
    prob *= cell.prob

stopping early once ``prob`` drops below ``prob_epsilon``.

The empty prefix always uses row 0. Prefix hashing is 64-bit FNV-1a, updated
incrementally so each step is O(1).
"""

from __future__ import annotations

import math
import random
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = 0xFFFFFFFFFFFFFFFF

DUMP_MAGIC = b"HPT1"


@dataclass(frozen=True)
class HptConfig:
    num_rows: int = 1024
    num_cols: int = 128
    sample_fraction: float = 0.01
    prob_epsilon: float = 1e-12
    # floor on the sample size so small corpora still train a usable table
    min_sample: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.num_rows < 1 or self.num_cols < 1:
            raise ValueError("num_rows and num_cols must be >= 1")
        if not 0 < self.sample_fraction <= 1:
            raise ValueError("sample_fraction must lie in (0, 1]")
        if self.prob_epsilon < 0:
            raise ValueError("prob_epsilon must be >= 0")

    @property
    def table_bytes(self) -> int:
        return self.num_rows * self.num_cols * 16


def prefix_hash_init() -> None:
    """State of the empty (sentinel) prefix."""
    return None


def prefix_hash_step(state: int | None, byte: int, num_cols: int = 128) -> int:
    if not 0 <= byte < num_cols:
        raise ValueError(f"byte {byte} outside the {num_cols}-symbol alphabet")
    h = FNV_OFFSET if state is None else state
    return ((h ^ byte) * FNV_PRIME) & MASK64


def row_of(state: int | None, num_rows: int) -> int:
    return 0 if state is None else state % num_rows


def reservoir_sample(items: Sequence, k: int, seed: int = 0) -> list:
    """Uniform sample of ``k`` items (Li's Algorithm L), order-stable for a seed."""
    n = len(items)
    if k >= n:
        return list(items)
    if k <= 0:
        return []
    rng = random.Random(seed)
    reservoir = list(items[:k])
    w = math.exp(math.log(rng.random()) / k)
    i = k - 1
    while True:
        i += math.floor(math.log(rng.random()) / math.log(1.0 - w)) + 1
        if i >= n:
            break
        reservoir[rng.randrange(k)] = items[i]
        w *= math.exp(math.log(rng.random()) / k)
    return reservoir


def _padded(keys: Sequence[bytes], start: int) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad ``key[start:]`` for every key into a uint8 matrix."""
    lengths = np.fromiter((max(len(k) - start, 0) for k in keys), dtype=np.int64, count=len(keys))
    width = int(lengths.max()) if len(keys) else 0
    if width == 0:
        return np.zeros((len(keys), 0), dtype=np.uint8), lengths
    buf = b"".join(k[start:].ljust(width, b"\0") for k in keys)
    return np.frombuffer(buf, dtype=np.uint8).reshape(len(keys), width), lengths


def _check_alphabet(mat: np.ndarray, num_cols: int) -> None:
    if mat.size and int(mat.max()) >= num_cols:
        raise ValueError(f"byte value >= {num_cols} in key set (non-ASCII input)")


FX_BITS = 63
ONE = 1 << FX_BITS
# cells are multiples of 2**10 so every one is exact as a float64 (53-bit mantissa)
_GRID_MASK = ~((1 << 10) - 1)
_SCALE = 2.0 ** -FX_BITS


def _mulhi(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """High 64 bits of the 128-bit product of uint64 arrays, exact."""
    m32 = np.uint64(0xFFFFFFFF)
    s32 = np.uint64(32)
    a0, a1 = a & m32, a >> s32
    b0, b1 = b & m32, b >> s32
    t = a0 * b0
    u = a1 * b0 + (t >> s32)
    v = a0 * b1 + (u & m32)
    return a1 * b1 + (u >> s32) + (v >> s32)


def _mul_fx(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``(a * b) >> 63`` for fixed-point operands <= 2**63."""
    return (_mulhi(a, b) << np.uint64(1)) | ((a * b) >> np.uint64(63))


def _fixed_rows(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row exclusive prefix sums and probabilities in fixed point.

    ``cdf[c]`` is ``excl[c] * ONE / total`` floored onto the grid and
    ``prob[c] = cdf[c+1] - cdf[c]`` (``ONE`` after the last column), so the
    boundaries telescope exactly.
    """
    rows, cols = counts.shape
    cdf = np.zeros((rows, cols), dtype=np.uint64)
    prob = np.zeros((rows, cols), dtype=np.uint64)
    for r in np.flatnonzero(counts.sum(axis=1)):
        row = counts[r].tolist()
        total = sum(row)
        acc = 0
        bounds = []
        for c in row:
            bounds.append(((acc << FX_BITS) // total) & _GRID_MASK)
            acc += c
        bounds.append(ONE)
        cdf[r] = bounds[:-1]
        prob[r] = [bounds[i + 1] - bounds[i] for i in range(cols)]
    return cdf, prob


class Hpt:
    """The trained table. Immutable after construction.

    Cells are held in 63-bit fixed point and the CDF is accumulated with
    floor-rounded integer products. That makes ``cdf_at`` exactly monotone in
    key order, which float accumulation cannot promise once rounding of
    ``cdf + prob`` drifts past the next boundary. ``cdf`` and ``prob`` expose
    the same cells as floats.
    """

    def __init__(self, config: HptConfig, cdf_fx: np.ndarray, prob_fx: np.ndarray):
        self.config = config
        self.num_rows = config.num_rows
        self.num_cols = config.num_cols
        self.cdf_fx = np.ascontiguousarray(cdf_fx, dtype=np.uint64)
        self.prob_fx = np.ascontiguousarray(prob_fx, dtype=np.uint64)
        self.cdf = self.cdf_fx.astype(np.float64) * _SCALE
        self.prob = self.prob_fx.astype(np.float64) * _SCALE
        self.eps_fx = int(config.prob_epsilon * 2.0 ** FX_BITS)
        # nested lists of ints are the fastest thing to index from the scalar path
        self._cdf_rows = self.cdf_fx.tolist()
        self._prob_rows = self.prob_fx.tolist()

    @classmethod
    def build(cls, sample: Iterable[bytes | str], config: HptConfig | None = None) -> "Hpt":
        config = config or HptConfig()
        keys = [k.encode("ascii") if isinstance(k, str) else bytes(k) for k in sample]
        if not keys:
            raise ValueError("cannot build an HPT from an empty sample")
        counts = np.zeros(config.num_rows * config.num_cols, dtype=np.int64)
        chunk = 1 << 15
        for lo in range(0, len(keys), chunk):
            mat, lengths = _padded(keys[lo:lo + chunk], 0)
            _check_alphabet(mat, config.num_cols)
            h = np.full(len(mat), FNV_OFFSET, dtype=np.uint64)
            for j in range(mat.shape[1]):
                live = lengths > j
                c = mat[live, j].astype(np.uint64)
                rows = np.zeros(len(c), dtype=np.uint64) if j == 0 else h[live] % np.uint64(config.num_rows)
                counts += np.bincount((rows * np.uint64(config.num_cols) + c).astype(np.int64),
                                      minlength=counts.size)
                h[live] = (h[live] ^ c) * np.uint64(FNV_PRIME)
        counts = counts.reshape(config.num_rows, config.num_cols)
        cdf, prob = _fixed_rows(counts)
        hpt = cls(config, cdf, prob)
        hpt.counts = counts
        return hpt

    @classmethod
    def from_keys(cls, keys: Sequence[bytes], config: HptConfig | None = None) -> "Hpt":
        """Train on a reservoir sample of ``keys`` sized by the config."""
        config = config or HptConfig()
        k = max(math.ceil(config.sample_fraction * len(keys)), min(len(keys), config.min_sample))
        return cls.build(reservoir_sample(keys, k, config.seed), config)

    def row_of_prefix(self, prefix: bytes) -> int:
        state = prefix_hash_init()
        for b in prefix:
            state = prefix_hash_step(state, b, self.num_cols)
        return row_of(state, self.num_rows)

    def get_cdf(self, s: bytes | str) -> float:
        if isinstance(s, str):
            s = s.encode("ascii")
        if not s:
            raise ValueError("get_cdf needs a nonempty string")
        if max(s) >= self.num_cols:
            raise ValueError(f"byte value >= {self.num_cols} in {s!r}")
        return self.cdf_at(s, 0)

    def cdf_at(self, key: bytes, start: int = 0) -> float:
        """CDF of ``key[start:]``; no validation, this is the lookup hot path."""
        n = len(key)
        if start >= n:
            return 0.0
        C = self._cdf_rows
        P = self._prob_rows
        c = key[start]
        cdf = C[0][c]
        prob = P[0][c]
        eps = self.eps_fx
        if prob < eps:
            return cdf * _SCALE
        h = ((FNV_OFFSET ^ c) * FNV_PRIME) & MASK64
        R = self.num_rows
        for i in range(start + 1, n):
            c = key[i]
            row = h % R
            cdf += (prob * C[row][c]) >> 63
            prob = (prob * P[row][c]) >> 63
            if prob < eps:
                break
            h = ((h ^ c) * FNV_PRIME) & MASK64
        return cdf * _SCALE

    def cdf_many(self, keys: Sequence[bytes], start: int = 0) -> np.ndarray:
        """Vectorised ``cdf_at`` over many keys; bit-identical to the scalar path."""
        out = np.empty(len(keys), dtype=np.float64)
        chunk = 1 << 16
        R = np.uint64(self.num_rows)
        prime = np.uint64(FNV_PRIME)
        eps = np.uint64(self.eps_fx)
        for lo in range(0, len(keys), chunk):
            mat, lengths = _padded(keys[lo:lo + chunk], start)
            m = len(mat)
            cdf = np.zeros(m, dtype=np.uint64)
            prob = np.zeros(m, dtype=np.uint64)
            h = np.full(m, FNV_OFFSET, dtype=np.uint64)
            alive = lengths > 0
            for j in range(mat.shape[1]):
                idx = np.flatnonzero(alive & (lengths > j))
                if idx.size == 0:
                    break
                c = mat[idx, j]
                if j == 0:
                    cdf[idx] = self.cdf_fx[0, c]
                    p = self.prob_fx[0, c]
                else:
                    rows = (h[idx] % R).astype(np.intp)
                    p = prob[idx]
                    cdf[idx] += _mul_fx(p, self.cdf_fx[rows, c])
                    p = _mul_fx(p, self.prob_fx[rows, c])
                prob[idx] = p
                alive[idx[p < eps]] = False
                h[idx] = (h[idx] ^ c.astype(np.uint64)) * prime
            out[lo:lo + m] = cdf.astype(np.float64) * _SCALE
        return out

    # -- binary dump ---------------------------------------------------------

    def dumps(self) -> bytes:
        header = DUMP_MAGIC + struct.pack("<II", self.num_rows, self.num_cols)
        cells = np.stack([self.cdf, self.prob], axis=-1).astype("<f8")
        return header + cells.tobytes(order="C")

    @classmethod
    def loads(cls, data: bytes, config: HptConfig | None = None) -> "Hpt":
        if data[:4] != DUMP_MAGIC:
            raise ValueError("not an HPT dump (bad magic)")
        if len(data) < 12:
            raise ValueError("truncated HPT dump")
        rows, cols = struct.unpack_from("<II", data, 4)
        body = data[12:]
        if len(body) != rows * cols * 16:
            raise ValueError("truncated HPT dump")
        cells = np.frombuffer(body, dtype="<f8").reshape(rows, cols, 2)
        base = config or HptConfig()
        cfg = HptConfig(num_rows=rows, num_cols=cols, sample_fraction=base.sample_fraction,
                        prob_epsilon=base.prob_epsilon, min_sample=base.min_sample, seed=base.seed)
        fx = cells * float(ONE)
        if not np.all((fx >= 0) & (fx <= ONE)):
            raise ValueError("HPT dump cell outside [0, 1]")
        return cls(cfg, fx[..., 0].astype(np.uint64), fx[..., 1].astype(np.uint64))

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.dumps())

    @classmethod
    def load(cls, path, config: HptConfig | None = None) -> "Hpt":
        with open(path, "rb") as f:
            return cls.loads(f.read(), config)


def build_hpt(sample: Iterable[bytes | str], config: HptConfig | None = None) -> Hpt:
    return Hpt.build(sample, config)


def get_cdf(hpt: Hpt, s: bytes | str) -> float:
    return hpt.get_cdf(s)


def hpt_error_bound(n_prefix: int, contamination: int) -> float:
    """Worst-case |cell.prob - prob(c|P)| for a prefix seen ``n_prefix`` times
    whose row also absorbs ``contamination`` occurrences of other prefixes."""
    if n_prefix < 1:
        raise ValueError("n_prefix must be >= 1")
    if contamination < 0:
        raise ValueError("contamination must be >= 0")
    if contamination == 0:
        return 0.0
    return 1.0 / (n_prefix / contamination + 1.0)


def should_rebuild(observed_latency: float, baseline_latency: float, watermark: float = 0.5) -> bool:
    """True once throughput has fallen to ``watermark`` x the post-bulkload average or lower."""
    if baseline_latency <= 0:
        raise ValueError("baseline latency must be positive")
    if observed_latency <= 0:
        return False
    return baseline_latency / observed_latency <= watermark
