"""Per-episode metrics, 50-episode window aggregation and CSV I/O.

CSV schemas (column order fixed):

* per-episode: ``seed,episode,adv_id,reward,collisions,arrived,arrival_step``
  with one row per ADV; ``collisions`` is the episode total (events
  involving at least one ADV), repeated on each of that episode's rows.
* per-window: ``seed,window_start,window_end,collisions_sum,reward_per_adv``
  with 1-based inclusive episode bounds.
* latency: ``seed,episode,adv_id,seconds``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EPISODE_COLUMNS = ["seed", "episode", "adv_id", "reward", "collisions", "arrived", "arrival_step"]
WINDOW_COLUMNS = ["seed", "window_start", "window_end", "collisions_sum", "reward_per_adv"]
LATENCY_COLUMNS = ["seed", "episode", "adv_id", "seconds"]

WINDOW = 50


@dataclass
class EpisodeMetrics:
    episode: int  # 1-based
    rewards: dict = field(default_factory=dict)  # adv id -> cumulative reward
    collisions: int = 0
    arrived: dict = field(default_factory=dict)
    arrival_step: dict = field(default_factory=dict)
    latencies: list = field(default_factory=list)  # (adv id, seconds)
    steps: int = 0

    @property
    def n_adv(self) -> int:
        return len(self.rewards)


@dataclass(frozen=True)
class WindowAggregate:
    start: int
    end: int
    collisions: int
    reward_per_adv: float


def aggregate_windows(episodes: list[EpisodeMetrics], window: int = WINDOW) -> list[WindowAggregate]:
    """Sum collisions and rewards over consecutive windows; rewards divided by the ADV count."""
    out = []
    for i in range(0, len(episodes), window):
        chunk = episodes[i : i + window]
        n_adv = max(chunk[0].n_adv, 1)
        total = sum(sum(ep.rewards.values()) for ep in chunk)
        out.append(
            WindowAggregate(chunk[0].episode, chunk[-1].episode, sum(ep.collisions for ep in chunk), total / n_adv)
        )
    return out


def latency_summary(seconds) -> dict:
    arr = np.asarray(list(seconds), dtype=float)
    if arr.size == 0:
        return {"n": 0, "median": float("nan"), "p95": float("nan")}
    return {"n": int(arr.size), "median": float(np.median(arr)), "p95": float(np.percentile(arr, 95))}


# -- CSV ---------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def episode_rows(seed: int, episodes: list[EpisodeMetrics]) -> list[list]:
    rows = []
    for ep in episodes:
        for adv in sorted(ep.rewards):
            step = ep.arrival_step.get(adv)
            rows.append([seed, ep.episode, adv, float(ep.rewards[adv]), ep.collisions,
                         bool(ep.arrived.get(adv, False)), -1 if step is None else step])
    return rows


def window_rows(seed: int, windows: list[WindowAggregate]) -> list[list]:
    return [[seed, w.start, w.end, w.collisions, float(w.reward_per_adv)] for w in windows]


def latency_rows(seed: int, episodes: list[EpisodeMetrics]) -> list[list]:
    return [[seed, ep.episode, adv, float(sec)] for ep in episodes for adv, sec in ep.latencies]


def write_csv(path, columns: list[str], rows: list[list]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def episodes_from_rows(rows: list[dict]) -> dict[int, list[EpisodeMetrics]]:
    """Rebuild per-seed episode metrics from per-episode CSV rows."""
    by_seed: dict[int, dict[int, EpisodeMetrics]] = {}
    for row in rows:
        seed, episode, adv = int(row["seed"]), int(row["episode"]), int(row["adv_id"])
        ep = by_seed.setdefault(seed, {}).setdefault(episode, EpisodeMetrics(episode))
        ep.rewards[adv] = float(row["reward"])
        ep.collisions = int(row["collisions"])
        ep.arrived[adv] = row["arrived"] == "1"
        step = int(row["arrival_step"])
        if step >= 0:
            ep.arrival_step[adv] = step
    return {seed: [eps[k] for k in sorted(eps)] for seed, eps in sorted(by_seed.items())}


def windows_from_rows(rows: list[dict]) -> dict[int, list[WindowAggregate]]:
    out: dict[int, list[WindowAggregate]] = {}
    for row in rows:
        out.setdefault(int(row["seed"]), []).append(
            WindowAggregate(int(row["window_start"]), int(row["window_end"]), int(row["collisions_sum"]),
                            float(row["reward_per_adv"]))
        )
    return out


def first_zero_collision_window(windows: list[WindowAggregate]) -> int | None:
    """Start episode of the first window without collisions, or None."""
    for w in windows:
        if w.collisions == 0:
            return w.start
    return None
