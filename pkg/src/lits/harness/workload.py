"""YCSB-style operation streams over a corpus.

Each workload splits the corpus into a bulkload part and a held-out part, then
emits a deterministic list of operations. Operation tuples are
``(op, key, arg)`` where ``arg`` is the value for writes and the length for
scans.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus

READ = "read"
UPDATE = "update"
INSERT = "insert"
SCAN = "scan"
RMW = "rmw"
DELETE = "delete"
OP_TYPES = (READ, UPDATE, INSERT, SCAN, RMW, DELETE)

YCSB_MIXES = {
    "a": {READ: 0.5, UPDATE: 0.5},
    "b": {READ: 0.95, UPDATE: 0.05},
    "c": {READ: 1.0},
    "d": {READ: 0.95, INSERT: 0.05},
    "e": {SCAN: 0.95, INSERT: 0.05},
    "f": {READ: 0.5, RMW: 0.5},
}
KINDS = ("a", "b", "c", "d", "e", "f", "insert-only", "delete-only", "read-only")
DEFAULT_BULKLOAD = {"c": 1.0, "read-only": 1.0, "insert-only": 0.5, "delete-only": 1.0}
INSERTING = {"d", "e", "insert-only"}


class WorkloadError(ValueError):
    pass


def parse_dist(text: str) -> tuple[str, float]:
    """``uniform`` or ``zipf`` / ``zipf:THETA``."""
    text = text.strip().lower()
    if text == "uniform":
        return "uniform", 0.0
    if text == "zipf":
        return "zipf", 1.0
    if text.startswith("zipf:"):
        try:
            theta = float(text[5:])
        except ValueError as exc:
            raise WorkloadError(f"bad zipf parameter in {text!r}") from exc
        if theta <= 0:
            raise WorkloadError("zipf theta must be positive")
        return "zipf", theta
    raise WorkloadError(f"unknown key distribution {text!r}")


class ZipfSampler:
    """Bounded zipf over ranks ``0 .. n-1``: P(r) proportional to 1/(r+1)**theta."""

    def __init__(self, n: int, theta: float = 1.0, seed: int = 0):
        if n < 1:
            raise ValueError("zipf needs n >= 1")
        w = 1.0 / np.arange(1, n + 1, dtype=np.float64) ** theta
        self.cdf = np.cumsum(w)
        self.cdf /= self.cdf[-1]
        self.n = n
        self.rng = np.random.default_rng(seed)

    def draw(self, size: int) -> np.ndarray:
        r = np.searchsorted(self.cdf, self.rng.random(size), side="right")
        return np.minimum(r, self.n - 1)


@dataclass
class WorkloadSpec:
    kind: str = "a"
    op_count: int = 20000
    dist: str = "uniform"
    bulkload_fraction: float | None = None
    scan_len: tuple[int, int] = (1, 100)
    seed: int = 0

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in KINDS:
            raise WorkloadError(f"unknown workload {self.kind!r}; expected one of {', '.join(KINDS)}")
        self.dist_name, self.theta = parse_dist(self.dist)
        if self.dist_name == "zipf" and self.kind in INSERTING:
            raise WorkloadError(f"zipf keys are not supported for inserting workload {self.kind!r}")
        if self.op_count < 0:
            raise WorkloadError("op_count must be >= 0")
        if self.bulkload_fraction is not None and not 0 < self.bulkload_fraction <= 1:
            raise WorkloadError("bulkload fraction must lie in (0, 1]")

    @property
    def load_fraction(self) -> float:
        if self.bulkload_fraction is not None:
            return self.bulkload_fraction
        return DEFAULT_BULKLOAD.get(self.kind, 0.8)


@dataclass
class Workload:
    spec: WorkloadSpec
    bulk: list[tuple[bytes, int]]
    ops: list[tuple]
    held_out: int = 0
    counts: dict = field(default_factory=dict)


def _picker(spec: WorkloadSpec, population: list[bytes], seed: int):
    n = len(population)
    if spec.dist_name == "zipf":
        z = ZipfSampler(n, spec.theta, seed)
        order = np.random.default_rng(seed + 1).permutation(n)
        draws = iter(())

        def pick() -> bytes:
            nonlocal draws
            r = next(draws, None)
            if r is None:
                draws = iter(order[z.draw(4096)].tolist())
                r = next(draws)
            return population[r]
        return pick
    rng = random.Random(seed)
    return lambda: population[rng.randrange(n)]


def gen_workload(spec: WorkloadSpec, corpus: Corpus) -> Workload:
    rng = random.Random(spec.seed)
    n = len(corpus)
    perm = list(range(n))
    rng.shuffle(perm)
    n_load = int(round(spec.load_fraction * n))
    if n_load < 1:
        raise WorkloadError("bulkload part would be empty")
    keys, values = corpus.keys, corpus.values
    bulk = [(keys[i], values[i]) for i in perm[:n_load]]
    held = [keys[i] for i in perm[n_load:]]
    loaded = [k for k, _ in bulk]
    ops: list[tuple] = []
    vrng = random.Random(spec.seed ^ 0x5EED)

    if spec.kind == "insert-only":
        ops = [(INSERT, k, vrng.getrandbits(64)) for k in held]
        return Workload(spec, bulk, ops, len(held), _count(ops))
    if spec.kind == "delete-only":
        victims = rng.sample(loaded, len(loaded) // 2)
        ops = [(DELETE, k, 0) for k in victims]
        return Workload(spec, bulk, ops, len(held), _count(ops))

    mix = YCSB_MIXES["c" if spec.kind == "read-only" else spec.kind]
    names = list(mix)
    weights = [mix[k] for k in names]
    choices = rng.choices(names, weights, k=spec.op_count)
    n_ins = choices.count(INSERT)
    if n_ins > len(held):
        raise WorkloadError(f"workload {spec.kind} needs {n_ins} held-out keys, corpus leaves {len(held)}")

    pick = _picker(spec, loaded, spec.seed + 7)
    everything = keys
    urng = random.Random(spec.seed + 11)
    srng = random.Random(spec.seed + 13)
    ins_iter = iter(held)
    if spec.kind == "d":
        recent = list(loaded)
        recency = ZipfSampler(len(loaded) + n_ins, 1.0, spec.seed + 17)
    for op in choices:
        if op == INSERT:
            k = next(ins_iter)
            ops.append((INSERT, k, vrng.getrandbits(64)))
            if spec.kind == "d":
                recent.append(k)
        elif op == READ:
            if spec.kind == "d":
                while True:
                    r = int(recency.draw(1)[0])
                    if r < len(recent):
                        break
                ops.append((READ, recent[-1 - r], 0))
            else:
                ops.append((READ, pick(), 0))
        elif op == UPDATE:
            # uniform updates range over the whole data set (misses become
            # inserts); zipf updates stay on the bulkloaded ranks
            k = pick() if spec.dist_name == "zipf" else everything[urng.randrange(n)]
            ops.append((UPDATE, k, vrng.getrandbits(64)))
        elif op == RMW:
            ops.append((RMW, pick(), vrng.getrandbits(64)))
        else:
            ops.append((SCAN, pick(), srng.randint(*spec.scan_len)))
    return Workload(spec, bulk, ops, len(held), _count(ops))


def _count(ops) -> dict:
    out = dict.fromkeys(OP_TYPES, 0)
    for op in ops:
        out[op[0]] += 1
    return out
