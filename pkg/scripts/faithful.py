"""Full-scale runs: road course, 10 NDVs, 1/2/3 ADVs, 500 episodes, 10 seeds.

    python scripts/faithful.py --out runs/faithful [--adv 1 2 3] [--seeds 10] [--workers 4]

Each configuration takes hours on one core (300/400 hidden units, T = 1000).
Use ``--episodes`` and ``--seeds`` to shorten a run for a quick look.
"""

from __future__ import annotations

import argparse
import dataclasses
from pathlib import Path

import numpy as np

from codrive.harness.experiment import run_experiment
from codrive.harness.plots import export_plots
from codrive.harness.scenario import load_scenario


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/faithful")
    p.add_argument("--adv", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--episodes", type=int)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    for k in args.adv:
        sc = load_scenario(f"faithful_{k}adv")
        if args.episodes is not None:
            sc = dataclasses.replace(sc, episodes=args.episodes)
        out = Path(args.out) / f"{k}adv"
        res = run_experiment(sc, out, seeds=list(sc.seeds)[: args.seeds], workers=args.workers)["results"]
        export_plots(out)
        per_window = np.median([[w.collisions for w in r.windows] for r in res], axis=0)
        print(f"{k} ADV: median collisions per window {per_window.tolist()}")


if __name__ == "__main__":
    main()
