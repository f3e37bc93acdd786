"""Build an index, run the ordered-map operations, and look at its shape.

    python3 demos/basic_usage.py
"""

from __future__ import annotations

import random

from lits import LitsConfig, LitsIndex
from lits.harness.corpus import random_keys


def main() -> None:
    rng = random.Random(0)
    words = random_keys(50_000, seed=0)
    idx = LitsIndex.bulkload({w: rng.getrandbits(64) for w in words})
    print(f"{len(idx)} keys, bulkload {idx.bulkload_seconds:.2f}s")

    probe = words[123]
    print("get", probe, "->", idx.get(probe))
    idx.insert(b"zebra-crossing", 7)
    idx.update(probe, 42)
    idx.remove(words[124])
    print("after update:", idx[probe], "| removed still present?", words[124] in idx)

    print("first five keys from 'm':")
    for key, value in idx.scan("m").take(5):
        print("  ", key, value)

    for name, cfg in (("lits", LitsConfig()), ("lit (no subtries)", LitsConfig(use_subtries=False))):
        s = LitsIndex.bulkload([(w, 0) for w in words], config=cfg).stats()
        print(f"{name:>18}: avg base height {s.avg_base_height:.2f}, "
              f"subtrie levels {s.avg_height_in_subtries:.2f}, "
              f"{s.bytes_used / 2 ** 20:.1f} MiB, nodes {dict((k, v) for k, v in s.node_counts.items() if v)}")


if __name__ == "__main__":
    main()
