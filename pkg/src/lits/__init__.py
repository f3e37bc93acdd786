"""Ordered index for string keys built from learned model nodes, compact
leaves and embedded radix subtries."""

from .hpt import Hpt, HptConfig, build_hpt, get_cdf, hpt_error_bound, should_rebuild
from .index import DuplicateKeyError, IndexStats, InvariantError, LitsConfig, LitsIndex, ScanIterator
from .keys import InvalidKeyError
from .metrics import cpl, gpkl, local_gpkl, pkl, prefix_skew_ratio, sm_encode, unique_rate
from .pmss import (
    GpklGenConfig,
    LatencyTable,
    PerformanceModel,
    Structure,
    estimate_latency,
    gen_gpkl_dataset,
    load_tables,
    save_tables,
    select_structure,
)
from .subtrie import Subtrie

__version__ = "0.1.0"

__all__ = [
    "DuplicateKeyError", "GpklGenConfig", "Hpt", "HptConfig", "IndexStats", "InvalidKeyError",
    "InvariantError", "LatencyTable", "LitsConfig", "LitsIndex", "PerformanceModel", "ScanIterator",
    "Structure", "Subtrie", "build_hpt", "cpl", "estimate_latency", "gen_gpkl_dataset", "get_cdf",
    "gpkl", "hpt_error_bound", "load_tables", "local_gpkl", "pkl", "prefix_skew_ratio", "save_tables",
    "select_structure", "should_rebuild", "sm_encode", "unique_rate",
]
