"""Generate key sets of increasing gpkl and compare how well two CDF models
spread them over an array (unique rate), plus the prefix skew curve.

    python3 demos/hardness_metrics.py
"""

from __future__ import annotations

import numpy as np

from lits.hpt import Hpt, HptConfig
from lits.metrics import gpkl, local_gpkl, prefix_skew_ratio, sm_encode, unique_rate
from lits.pmss import GpklGenConfig, generate_gpkl_keys

N = 2 ** 14


def main() -> None:
    print(f"{'target':>6} {'gpkl':>6} {'local':>6} | {'SF':>3} {'UR hpt':>7} {'UR sm':>7} | skew@1,4,16")
    for target in (4, 9, 15):
        got = generate_gpkl_keys(GpklGenConfig(target_gpkl=target, n=N, seed=target))
        keys = got.keys
        hpt = Hpt.from_keys(keys, HptConfig(sample_fraction=1.0)).cdf_many(keys)
        sm = np.array([sm_encode(k) for k in keys])
        skew = ", ".join(f"{prefix_skew_ratio(keys, k):.3f}" for k in (1, 4, 16))
        for i, sf in enumerate((1, 10, 100)):
            head = f"{target:>6} {gpkl(keys):>6.2f} {local_gpkl(keys):>6.2f}" if i == 0 else " " * 20
            print(f"{head} | {sf:>3} {unique_rate(hpt, keys, sf):>7.3f} {unique_rate(sm, keys, sf):>7.3f} |"
                  + (f" {skew}" if i == 0 else ""))


if __name__ == "__main__":
    main()
