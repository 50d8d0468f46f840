"""Train the desk-scale scenarios and report the collision/reward trends.

    python scripts/ci_trends.py --out runs/ci_trends [--seeds 5] [--workers 1]

Trains ``ci`` (2 ADVs + 3 NDVs) and ``ci_1adv`` on the same seeds, writes
metrics CSVs and figures under ``--out``, and prints:

* median collisions over the first and last 20% of episodes (2-ADV run),
* median per-window reward in the first and last window,
* the first zero-collision 50-episode window per seed for both runs.
"""

from __future__ import annotations

import argparse
import math
import time
from pathlib import Path

import numpy as np

from codrive.harness import metrics as M
from codrive.harness.experiment import run_experiment
from codrive.harness.plots import export_plots
from codrive.harness.scenario import load_scenario


def fifth_sums(result):
    c = [ep.collisions for ep in result.episodes]
    n = max(len(c) // 5, 1)
    return sum(c[:n]), sum(c[-n:])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/ci_trends")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    out = Path(args.out)
    zero = {}
    for name in ("ci", "ci_1adv"):
        sc = load_scenario(name)
        t0 = time.perf_counter()
        res = run_experiment(sc, out / name, seeds=list(range(args.seeds)), workers=args.workers)["results"]
        export_plots(out / name)
        print(f"{name}: {time.perf_counter() - t0:.0f}s")
        zero[name] = [M.first_zero_collision_window(r.windows) or math.inf for r in res]
        if name == "ci":
            firsts, lasts = zip(*(fifth_sums(r) for r in res))
            print(f"  collisions first 20% {list(firsts)} median {np.median(firsts):g}")
            print(f"  collisions last 20%  {list(lasts)} median {np.median(lasts):g}")
            first_w = np.median([r.windows[0].reward_per_adv for r in res])
            last_w = np.median([r.windows[-1].reward_per_adv for r in res])
            print(f"  median window reward first {first_w:.4g} last {last_w:.4g}")
        print(f"  first zero-collision window start {zero[name]} median {np.median(zero[name]):g}")


if __name__ == "__main__":
    main()
