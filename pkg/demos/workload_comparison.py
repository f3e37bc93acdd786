"""Run a few YCSB-style workloads against the learned index, the learned index
without subtries, the bare trie and a sorted-map baseline.

    python3 demos/workload_comparison.py
"""

from __future__ import annotations

from lits.harness.bench import make_adapter, run_bench
from lits.harness.corpus import corpus_from_lines, random_keys
from lits.harness.workload import WorkloadSpec, gen_workload


def main() -> None:
    corpus = corpus_from_lines(random_keys(40_000, seed=1), seed=1)
    print(f"{'workload':>12} " + " ".join(f"{name:>9}" for name in ("lits", "lit", "trie", "oracle")) + "   (Mops/s)")
    for kind in ("a", "c", "e", "insert-only"):
        wl = gen_workload(WorkloadSpec(kind, op_count=20_000, seed=2), corpus)
        row = []
        for name in ("lits", "lit", "trie", "oracle"):
            rep = run_bench(make_adapter(name), wl, verify=True, seed=3)
            row.append(rep.throughput_mops)
        print(f"{kind:>12} " + " ".join(f"{x:>9.3f}" for x in row))


if __name__ == "__main__":
    main()
