"""Dataset hardness metrics written as long-format rows (metric, param, model, value)."""

from __future__ import annotations

import csv
from typing import Sequence

import numpy as np

from ..hpt import Hpt
from ..metrics import gpkl, local_gpkl, prefix_skew_ratio, sm_encode, unique_rate

SKEW_PREFIXES = (1, 2, 4, 8, 12, 16, 24, 32)
SCALE_FACTORS = (1, 2, 5, 10, 20, 50, 100)


def analyze_keys(keys: Sequence[bytes], group: int = 32) -> list[tuple[str, str, str, float]]:
    keys = sorted(keys)
    rows: list[tuple[str, str, str, float]] = [
        ("keys", "", "", float(len(keys))),
        ("avg_len", "", "", float(np.mean([len(k) for k in keys]))),
        ("gpkl", "", "", gpkl(keys)),
        ("local_gpkl", str(group), "", local_gpkl(keys, group)),
    ]
    for k in SKEW_PREFIXES:
        rows.append(("skewness", str(k), "", prefix_skew_ratio(keys, k)))
    hpt_x = Hpt.from_keys(keys).cdf_many(keys)
    sm_x = np.array([sm_encode(k) for k in keys])
    for sf in SCALE_FACTORS:
        rows.append(("unique_rate", str(sf), "hpt", unique_rate(hpt_x, keys, sf)))
        rows.append(("unique_rate", str(sf), "sm", unique_rate(sm_x, keys, sf)))
    return rows


def write_csv(dest, rows) -> None:
    """Write to a path or an open text stream."""
    if hasattr(dest, "write"):
        _emit(dest, rows)
        return
    with open(dest, "w", newline="") as f:
        _emit(f, rows)


def _emit(f, rows) -> None:
    w = csv.writer(f)
    w.writerow(("metric", "param", "model", "value"))
    w.writerows(rows)
