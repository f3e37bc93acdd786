"""Dataset ingestion: newline-delimited keys, filtered to valid index keys."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..keys import MAX_KEY_LEN


class CorpusError(ValueError):
    pass


@dataclass
class Corpus:
    keys: list[bytes]
    values: list[int]
    source_path: str | None = None
    dropped_non_ascii: int = 0
    dropped_too_long: int = 0
    dropped_dup: int = 0
    dropped_empty: int = 0
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.keys)

    def pairs(self) -> list[tuple[bytes, int]]:
        return list(zip(self.keys, self.values))

    def summary(self) -> dict:
        return {
            "source": self.source_path,
            "keys": len(self.keys),
            "dropped_non_ascii": self.dropped_non_ascii,
            "dropped_too_long": self.dropped_too_long,
            "dropped_dup": self.dropped_dup,
            "dropped_empty": self.dropped_empty,
        }


def corpus_from_lines(lines: Iterable[bytes], seed: int = 0, source: str | None = None) -> Corpus:
    """Keep ASCII keys of 1..255 bytes, first occurrence of each; order is preserved."""
    seen: set[bytes] = set()
    keys: list[bytes] = []
    c = Corpus([], [], source)
    for raw in lines:
        line = raw.rstrip(b"\r\n") if isinstance(raw, bytes) else raw.rstrip("\r\n").encode("utf-8")
        if not line:
            c.dropped_empty += 1
            continue
        if not line.isascii():
            c.dropped_non_ascii += 1
            continue
        if len(line) > MAX_KEY_LEN:
            c.dropped_too_long += 1
            continue
        if line in seen:
            c.dropped_dup += 1
            continue
        seen.add(line)
        keys.append(line)
    if not keys:
        raise CorpusError(f"no usable keys in {source or 'input'}")
    rng = random.Random(seed)
    c.keys = keys
    c.values = [rng.getrandbits(64) for _ in keys]
    return c


def load_corpus(path, seed: int = 0) -> Corpus:
    p = Path(path)
    try:
        with p.open("rb") as f:
            return corpus_from_lines(f, seed=seed, source=str(p))
    except OSError as exc:
        raise CorpusError(f"cannot read dataset {p}: {exc}") from exc


def write_keys(path, keys: Iterable[bytes]) -> None:
    with open(path, "wb") as f:
        for k in keys:
            f.write(k)
            f.write(b"\n")


def random_keys(n: int, seed: int = 0, min_len: int = 5, max_len: int = 20,
                alphabet: bytes = bytes(range(33, 127))) -> list[bytes]:
    """``n`` distinct random printable keys (unsorted)."""
    rng = random.Random(seed)
    out: dict[bytes, None] = {}
    while len(out) < n:
        out[bytes(rng.choices(alphabet, k=rng.randint(min_len, max_len)))] = None
    return list(out)
