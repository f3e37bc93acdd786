from __future__ import annotations

import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from lits.cli import main
from lits.harness.analyze import analyze_keys, write_csv
from lits.harness.bench import (
    SCHEMA_VERSION,
    OracleAdapter,
    VerificationError,
    apply_op,
    make_adapter,
    run_bench,
)
from lits.harness.corpus import CorpusError, corpus_from_lines, load_corpus, random_keys, write_keys
from lits.harness.selftest import run_selftest
from lits.harness.workload import (
    DELETE,
    INSERT,
    READ,
    RMW,
    SCAN,
    UPDATE,
    WorkloadError,
    WorkloadSpec,
    ZipfSampler,
    gen_workload,
    parse_dist,
)

GOLDEN = Path(__file__).parent / "golden" / "report_tiny.json"


def corpus(n=2000, seed=0):
    return corpus_from_lines(random_keys(n, seed=seed), seed=seed)


# -- corpus -----------------------------------------------------------------------

def test_corpus_drop_counts(tmp_path):
    path = tmp_path / "d.txt"
    path.write_bytes(b"alpha\nbeta\nalpha\n" + b"a" * 256 + b"\ncaf\xc3\xa9\n\ngamma\r\n" + b"b" * 255 + b"\n")
    c = load_corpus(path, seed=1)
    assert c.keys == [b"alpha", b"beta", b"gamma", b"b" * 255]
    assert (c.dropped_dup, c.dropped_too_long, c.dropped_non_ascii, c.dropped_empty) == (1, 1, 1, 1)
    assert len(set(c.values)) == 4 and all(0 <= v < 2 ** 64 for v in c.values)
    assert load_corpus(path, seed=1).values == c.values
    assert c.summary()["keys"] == 4


def test_corpus_errors(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path / "missing.txt")
    (tmp_path / "bad.txt").write_bytes(b"\xff\xfe\n\n")
    with pytest.raises(CorpusError):
        load_corpus(tmp_path / "bad.txt")


# -- workloads --------------------------------------------------------------------------

def test_workload_c_reads_only_bulkloaded_keys():
    wl = gen_workload(WorkloadSpec("c", op_count=5000, seed=3), corpus())
    loaded = {k for k, _ in wl.bulk}
    assert len(wl.bulk) == 2000
    assert all(op == READ and k in loaded for op, k, _ in wl.ops)


def test_insert_only_inserts_the_held_out_half():
    c = corpus()
    wl = gen_workload(WorkloadSpec("insert-only", seed=4), c)
    loaded = {k for k, _ in wl.bulk}
    inserted = [k for op, k, _ in wl.ops]
    assert all(op == INSERT for op, _, _ in wl.ops)
    assert len(loaded) == 1000 and sorted(inserted) == sorted(set(c.keys) - loaded)


def test_delete_only_removes_half():
    wl = gen_workload(WorkloadSpec("delete-only", seed=5), corpus())
    assert len(wl.bulk) == 2000 and wl.counts[DELETE] == 1000
    assert len({k for _, k, _ in wl.ops}) == 1000


@pytest.mark.parametrize("kind,expected", [("a", {READ: 0.5, UPDATE: 0.5}), ("b", {READ: 0.95, UPDATE: 0.05}),
                                           ("d", {READ: 0.95, INSERT: 0.05}), ("e", {SCAN: 0.95, INSERT: 0.05}),
                                           ("f", {READ: 0.5, RMW: 0.5})])
def test_ycsb_mixes(kind, expected):
    wl = gen_workload(WorkloadSpec(kind, op_count=20000, seed=6), corpus(10000))
    assert len(wl.bulk) == 8000
    for op, frac in expected.items():
        assert wl.counts[op] / 20000 == pytest.approx(frac, abs=0.015)
    if kind == "e":
        lens = [a for op, _, a in wl.ops if op == SCAN]
        assert min(lens) == 1 and max(lens) == 100


def test_workload_is_deterministic():
    c = corpus()
    a = gen_workload(WorkloadSpec("a", op_count=3000, seed=9), c)
    b = gen_workload(WorkloadSpec("a", op_count=3000, seed=9), c)
    assert a.ops == b.ops and a.bulk == b.bulk
    z1 = gen_workload(WorkloadSpec("b", op_count=3000, dist="zipf", seed=9), c)
    z2 = gen_workload(WorkloadSpec("b", op_count=3000, dist="zipf", seed=9), c)
    assert z1.ops == z2.ops


def test_uniform_updates_can_miss_zipf_updates_cannot():
    c = corpus(5000)
    wl = gen_workload(WorkloadSpec("a", op_count=20000, seed=1), c)
    loaded = {k for k, _ in wl.bulk}
    assert any(k not in loaded for op, k, _ in wl.ops if op == UPDATE)
    wl = gen_workload(WorkloadSpec("a", op_count=20000, dist="zipf", seed=1), c)
    loaded = {k for k, _ in wl.bulk}
    assert all(k in loaded for op, k, _ in wl.ops if op == UPDATE)


def test_workload_errors():
    with pytest.raises(WorkloadError):
        WorkloadSpec("d", dist="zipf")
    with pytest.raises(WorkloadError):
        WorkloadSpec("z")
    with pytest.raises(WorkloadError):
        parse_dist("pareto")
    with pytest.raises(WorkloadError):
        parse_dist("zipf:-1")
    assert parse_dist("zipf:0.9") == ("zipf", 0.9)
    with pytest.raises(WorkloadError):
        gen_workload(WorkloadSpec("e", op_count=20000), corpus(100))


def test_zipf_rank_ratio():
    draws = ZipfSampler(100_000, 1.0, seed=2).draw(10 ** 6)
    counts = np.bincount(draws, minlength=2)
    assert counts[0] / counts[1] == pytest.approx(2.0, rel=0.10)


# -- bench ----------------------------------------------------------------------------------

def test_empty_stream_reports_zero():
    wl = gen_workload(WorkloadSpec("a", op_count=0), corpus(100))
    rep = run_bench(make_adapter("oracle"), wl)
    assert rep.throughput_mops == 0.0 and rep.op_total == 0 and sum(rep.op_counts.values()) == 0


def test_rmw_counts_as_one_op():
    wl = gen_workload(WorkloadSpec("f", op_count=1000, seed=1), corpus(500))
    rep = run_bench(make_adapter("oracle"), wl)
    assert rep.op_total == 1000 == sum(rep.op_counts.values())
    assert rep.op_counts[RMW] == wl.counts[RMW]


def test_rmw_semantics():
    ix = OracleAdapter()
    ix.bulkload([(b"k", 2 ** 64 - 1)])
    assert apply_op(ix, (RMW, b"k", 3)) == 2 ** 64 - 1
    assert ix.get(b"k") == 2
    assert apply_op(ix, (RMW, b"missing", 3)) is None and ix.get(b"missing") is None
    assert apply_op(ix, (UPDATE, b"new", 5)) is False and ix.get(b"new") == 5


@pytest.mark.parametrize("index", ["lits", "lit", "trie"])
def test_verify_100k_ops(index):
    c = corpus(10_000, seed=2)
    for kind in ("a", "e"):
        wl = gen_workload(WorkloadSpec(kind, op_count=100_000 if kind == "a" else 10_000, seed=3), c)
        rep = run_bench(make_adapter(index), wl, verify=True, seed=4)
        assert rep.verified and rep.verified_ops >= 100


class Faulty(OracleAdapter):
    """Loses every key ending in 'a'."""

    name = "faulty"

    def bulkload(self, pairs):
        super().bulkload(pairs)
        real = self.get
        self.get = lambda key: None if key.endswith(b"a") else real(key)


def test_verification_catches_divergence():
    wl = gen_workload(WorkloadSpec("c", op_count=20000, seed=5), corpus())
    with pytest.raises(VerificationError) as err:
        run_bench(Faulty(), wl, verify=True, sample_rate=0.2)
    assert err.value.op[0] == READ and err.value.got is None


def test_report_matches_golden_schema():
    wl = gen_workload(WorkloadSpec("a", op_count=500, seed=0), corpus(300))
    rep = json.loads(run_bench(make_adapter("lits"), wl, verify=True, seed=0).to_json())
    golden = json.loads(GOLDEN.read_text())
    assert rep["schema_version"] == SCHEMA_VERSION == golden["schema_version"]
    assert sorted(rep) == golden["keys"]
    assert sorted(rep["stats"]) == golden["stats_keys"]
    assert rep["op_counts"] == golden["op_counts"]
    assert rep["bulkload_keys"] == golden["bulkload_keys"]


# -- analyze / selftest ---------------------------------------------------------------

def test_analyze_rows():
    keys = sorted(random_keys(3000, seed=1))
    rows = analyze_keys(keys)
    metrics = {(m, p, mo) for m, p, mo, _ in rows}
    assert ("gpkl", "", "") in metrics and ("skewness", "8", "") in metrics
    assert ("unique_rate", "100", "hpt") in metrics and ("unique_rate", "100", "sm") in metrics
    buf = io.StringIO()
    write_csv(buf, rows)
    parsed = list(csv.reader(io.StringIO(buf.getvalue())))
    assert parsed[0] == ["metric", "param", "model", "value"] and len(parsed) == len(rows) + 1


def test_selftest_small():
    lines = []
    assert run_selftest(keys=500, ops=3000, seed=1, log=lines.append)
    assert len(lines) == 3 and all(l.startswith("PASS") for l in lines)


# -- CLI ----------------------------------------------------------------------------------

def test_cli_unknown_flag_exits_2():
    r = subprocess.run([sys.executable, "-m", "lits", "bench", "--bogus"], capture_output=True, text=True)
    assert r.returncode == 2 and "usage" in r.stderr


def test_cli_gen_then_analyze(tmp_path, capsys):
    data = tmp_path / "g9.txt"
    assert main(["gen", "--gpkl", "9", "--n", "16384", "--seed", "1", "--out", str(data)]) == 0
    out = tmp_path / "a.csv"
    assert main(["analyze", "--dataset", str(data), "--out", str(out)]) == 0
    rows = {(r["metric"], r["param"], r["model"]): float(r["value"]) for r in csv.DictReader(out.open())}
    assert abs(rows[("gpkl", "", "")] - 9) <= 0.9
    assert rows[("keys", "", "")] == 16384


def test_cli_bench_and_errors(tmp_path, capsys):
    data = tmp_path / "r.txt"
    write_keys(data, random_keys(3000, seed=3))
    report = tmp_path / "rep.json"
    assert main(["bench", "--dataset", str(data), "--workload", "c", "--ops", "3000", "--verify",
                 "--out", str(report)]) == 0
    assert json.loads(report.read_text())["verified"] is True
    for index in ("lit", "trie", "oracle"):
        assert main(["bench", "--dataset", str(data), "--workload", "e", "--ops", "500", "--index", index,
                     "--verify"]) == 0
    assert main(["bench", "--dataset", str(data), "--workload", "d", "--dist", "zipf"]) == 1
    assert main(["bench", "--dataset", str(tmp_path / "nope.txt")]) == 1
    assert main(["gen", "--n", "100", "--out", str(tmp_path / "plain.txt")]) == 0
    assert len((tmp_path / "plain.txt").read_bytes().splitlines()) == 100
    assert main(["gen", "--gpkl", "200", "--n", "50", "--out", str(tmp_path / "x.txt")]) == 1
    capsys.readouterr()
    assert main(["analyze", "--dataset", str(data)]) == 0
    assert capsys.readouterr().out.startswith("metric,param,model,value")
