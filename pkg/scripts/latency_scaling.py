"""Action-selection latency versus network width and traffic density.

    python scripts/latency_scaling.py
"""

from __future__ import annotations

import numpy as np

from codrive.coddpg.agent import DDPGAgent, TrainingConfig
from codrive.harness.experiment import measure_latency
from codrive.sim import Kind, World, WorldConfig


def median_latency(hidden, n_ndv, samples=500, warmup=100):
    world = World(WorldConfig(n_adv=1, n_ndv=n_ndv, grid_spacing=20.0))
    world.reset(seed=0)
    adv = world.alive_ids(Kind.ADV)[0]
    agent = DDPGAgent(TrainingConfig(hidden=hidden))
    frame = world.sense(adv)
    xs = [measure_latency(agent, frame)[1] for _ in range(samples + warmup)][warmup:]
    return float(np.median(xs)), float(np.percentile(xs, 95))


def main():
    print("hidden      n_ndv  median_ms  p95_ms")
    for hidden in ((64, 64), (300, 400), (600, 800)):
        for n_ndv in (0, 10):
            med, p95 = median_latency(hidden, n_ndv)
            print(f"{str(hidden):11s} {n_ndv:5d}  {med * 1e3:9.4f}  {p95 * 1e3:6.4f}")


if __name__ == "__main__":
    main()
