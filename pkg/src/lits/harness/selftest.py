"""Oracle-equivalence and invariant checks runnable from the command line."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from typing import Callable

from sortedcontainers import SortedDict

from ..index import LitsConfig, LitsIndex
from .corpus import random_keys

# search / insert / delete / update / scan-window
DEFAULT_MIX = (0.40, 0.30, 0.15, 0.10, 0.05)


@dataclass
class StormResult:
    ops: int
    divergences: int
    first: str | None
    seconds: float


def oracle_storm(index: LitsIndex, oracle: SortedDict, pool: list[bytes], ops: int, seed: int = 0,
                 mix=DEFAULT_MIX, window: int = 10, stop_on_first: bool = True,
                 audit_every: int = 0) -> StormResult:
    """Drive ``index`` and ``oracle`` with the same random operations and compare.

    Keys come from ``pool``, so a pool larger than the loaded set makes inserts
    and misses likely.
    """
    rng = random.Random(seed)
    cum = []
    acc = 0.0
    for p in mix:
        acc += p
        cum.append(acc)
    bad = 0
    first = None
    t0 = time.perf_counter()
    n = len(pool)
    for step in range(ops):
        r = rng.random() * acc
        k = pool[rng.randrange(n)]
        if r < cum[0]:
            got, exp = index.get(k), oracle.get(k)
        elif r < cum[1]:
            v = rng.getrandbits(64)
            got = index.insert(k, v)
            exp = k not in oracle
            if exp:
                oracle[k] = v
        elif r < cum[2]:
            got = index.remove(k)
            exp = oracle.pop(k, None) is not None
        elif r < cum[3]:
            v = rng.getrandbits(64)
            got = index.update(k, v)
            exp = k in oracle
            if exp:
                oracle[k] = v
        else:
            got = index.scan(k).take(window)
            i = oracle.bisect_left(k)
            exp = list(oracle.items()[i:i + window])
        if got != exp:
            bad += 1
            if first is None:
                first = f"step {step}: key {k!r} expected {exp!r} got {got!r}"
            if stop_on_first:
                break
        if audit_every and step % audit_every == audit_every - 1:
            index.check_invariants()
    return StormResult(ops, bad, first, time.perf_counter() - t0)


def run_selftest(keys: int = 20000, ops: int = 100000, seed: int = 0,
                 log: Callable[[str], None] = print) -> bool:
    ok = True
    corpus = random_keys(int(keys * 1.5), seed=seed)
    rng = random.Random(seed)
    values = {k: rng.getrandbits(64) for k in corpus}
    loaded = corpus[:keys]
    for mode, cfg in (("lits", LitsConfig()), ("lit", LitsConfig(use_subtries=False)),
                      ("lit-w0", LitsConfig(use_subtries=False, w=0))):
        idx = LitsIndex.bulkload([(k, values[k]) for k in loaded], config=cfg)
        oracle = SortedDict((k, values[k]) for k in loaded)
        try:
            idx.check_invariants()
            res = oracle_storm(idx, oracle, corpus, ops, seed=seed + 1)
            idx.check_invariants()
            same = list(idx.items()) == list(oracle.items()) and len(idx) == len(oracle)
        except AssertionError as exc:
            log(f"FAIL {mode}: invariant violated: {exc}")
            ok = False
            continue
        good = res.divergences == 0 and same
        ok &= good
        log(f"{'PASS' if good else 'FAIL'} {mode}: {res.ops} ops, {res.divergences} divergences, "
            f"{res.seconds:.1f}s" + (f" ({res.first})" if res.first else ""))
    return ok
