"""Datasets, workloads, benchmark runner and self-test used by the CLI."""

from .bench import BenchReport, VerificationError, make_adapter, run_bench
from .corpus import Corpus, CorpusError, load_corpus
from .workload import WorkloadError, WorkloadSpec, ZipfSampler, gen_workload

__all__ = [
    "BenchReport", "Corpus", "CorpusError", "VerificationError", "WorkloadError", "WorkloadSpec",
    "ZipfSampler", "gen_workload", "load_corpus", "make_adapter", "run_bench",
]
