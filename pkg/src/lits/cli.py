"""Command-line entry point: ``lits {bench,calibrate,analyze,gen,selftest}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pmss
from .harness.analyze import analyze_keys, write_csv
from .harness.bench import INDEX_KINDS, VerificationError, make_adapter, run_bench
from .harness.corpus import CorpusError, load_corpus, random_keys, write_keys
from .harness.workload import KINDS, WorkloadError, WorkloadSpec, gen_workload
from .index import LitsConfig


def _bench(args) -> int:
    try:
        corpus = load_corpus(args.dataset, seed=args.seed)
        spec = WorkloadSpec(kind=args.workload, op_count=args.ops, dist=args.dist,
                            bulkload_fraction=args.bulkload_frac, seed=args.seed)
        wl = gen_workload(spec, corpus)
    except (CorpusError, WorkloadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    adapter = make_adapter(args.index, args.pmss_tables, LitsConfig(f_r=args.f_r))
    echo = {"index": args.index, "workload": spec.kind, "dist": args.dist, "ops": args.ops,
            "bulkload_fraction": spec.load_fraction, "seed": args.seed, "pmss_tables": args.pmss_tables,
            "f_r": args.f_r}
    try:
        report = run_bench(adapter, wl, verify=args.verify, seed=args.seed, config_echo=echo,
                           dataset=corpus.summary())
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 3
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(f"{report.index} workload={report.workload} ops={report.op_total} "
          f"throughput={report.throughput_mops:.4f} Mops/s bulkload={report.bulkload_seconds:.2f}s"
          + (f" verified={report.verified_ops}" if report.verified else ""))
    return 0


def _calibrate(args) -> int:
    top = args.n_max if args.n_max is not None else (pmss.FAST_LOG2N_GRID[-1] if args.fast else pmss.LOG2N_GRID[-1])
    grid = tuple(range(pmss.LOG2N_GRID[0], top + 1))
    log = (lambda m: print(m, file=sys.stderr)) if args.verbose else None
    learned, subtrie = pmss.calibrate(log2n_grid=grid, seed=args.seed, min_ns=int(args.min_ms * 1e6), progress=log)
    pmss.save_tables(args.out, learned, subtrie)
    print(f"wrote {args.out} ({Path(args.out).stat().st_size} bytes, n up to 2^{top})")
    return 0


def _analyze(args) -> int:
    try:
        corpus = load_corpus(args.dataset)
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if len(corpus) < 2:
        print("error: analyze needs at least 2 keys", file=sys.stderr)
        return 1
    rows = analyze_keys(corpus.keys, group=args.group)
    if not args.out:
        write_csv(sys.stdout, rows)
        return 0
    write_csv(args.out, rows)
    g = next(v for m, _, _, v in rows if m == "gpkl")
    print(f"{len(corpus)} keys, gpkl={g:.3f}; wrote {args.out}")
    return 0


def _gen(args) -> int:
    if args.gpkl is None:
        keys = sorted(random_keys(args.n, seed=args.seed))
    else:
        try:
            got = pmss.generate_gpkl_keys(pmss.GpklGenConfig(target_gpkl=args.gpkl, n=args.n, seed=args.seed))
        except pmss.GpklUnreachable as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        keys = got.keys
        print(f"gpkl {got.gpkl:.3f} (start {got.initial_gpkl:.3f}, {got.rounds} rounds)", file=sys.stderr)
    write_keys(args.out, keys)
    print(f"wrote {len(keys)} keys to {args.out}")
    return 0


def _selftest(args) -> int:
    from .harness.selftest import run_selftest
    return 0 if run_selftest(keys=args.keys, ops=args.ops, seed=args.seed) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lits", description="Learned string index: benchmarks and tooling.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a YCSB-style workload against an index")
    b.add_argument("--dataset", required=True, help="newline-delimited keys")
    b.add_argument("--workload", default="a", choices=KINDS)
    b.add_argument("--dist", default="uniform", help="uniform | zipf | zipf:THETA")
    b.add_argument("--ops", type=int, default=20000)
    b.add_argument("--bulkload-frac", type=float, default=None)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--verify", action="store_true", help="check 1%% of results against a sorted-map shadow")
    b.add_argument("--pmss-tables", default=None, help="latency tables from `calibrate`")
    b.add_argument("--f-r", type=float, default=0.5, help="read fraction used by structure selection")
    b.add_argument("--index", default="lits", choices=INDEX_KINDS)
    b.add_argument("--out", default=None, help="report JSON path")
    b.set_defaults(func=_bench)

    c = sub.add_parser("calibrate", help="measure latency tables for structure selection")
    c.add_argument("--out", required=True)
    c.add_argument("--fast", action="store_true", help=f"cap n at 2^{pmss.FAST_LOG2N_GRID[-1]}")
    c.add_argument("--n-max", type=int, default=None, help="largest log2(n) on the grid")
    c.add_argument("--min-ms", type=float, default=2.0, help="minimum timed span per measurement")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("-v", "--verbose", action="store_true")
    c.set_defaults(func=_calibrate)

    a = sub.add_parser("analyze", help="hardness metrics of a dataset as CSV")
    a.add_argument("--dataset", required=True)
    a.add_argument("--out", default=None)
    a.add_argument("--group", type=int, default=32, help="sublist size for local gpkl")
    a.set_defaults(func=_analyze)

    g = sub.add_parser("gen", help="generate a synthetic key set")
    g.add_argument("--gpkl", type=float, default=None, help="target gpkl (omit for plain random keys)")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_gen)

    s = sub.add_parser("selftest", help="oracle equivalence and invariant audit")
    s.add_argument("--keys", type=int, default=20000)
    s.add_argument("--ops", type=int, default=100000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
