"""Figures for a finished run, each written with the exact CSV behind it.

Plot CSVs (column order fixed):

* ``plot_collisions.csv`` / ``plot_reward.csv``:
  ``series,window_start,window_end,value`` where ``series`` is ``seed<k>`` or
  ``median``. The median series only appears when 3 or more seeds are present.
* ``plot_latency.csv``: ``seed,n,median,p25,p75,p95`` (seconds).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import metrics as M  # noqa: E402

SERIES_COLUMNS = ["series", "window_start", "window_end", "value"]
LATENCY_PLOT_COLUMNS = ["seed", "n", "median", "p25", "p75", "p95"]
MIN_SEEDS_FOR_MEDIAN = 3


def series_rows(windows: dict[int, list[M.WindowAggregate]], attr: str) -> list[list]:
    """Per-seed rows, then a median row per window index once enough seeds are present."""
    rows = []
    for seed, ws in sorted(windows.items()):
        rows += [[f"seed{seed}", w.start, w.end, float(getattr(w, attr))] for w in ws]
    if len(windows) >= MIN_SEEDS_FOR_MEDIAN:
        n = min(len(ws) for ws in windows.values())
        for i in range(n):
            col = [ws[i] for ws in windows.values()]
            rows.append(["median", col[0].start, col[0].end, float(np.median([getattr(w, attr) for w in col]))])
    return rows


def latency_plot_rows(samples: dict[int, list[float]]) -> list[list]:
    rows = []
    for seed, xs in sorted(samples.items()):
        a = np.asarray(xs, dtype=float)
        rows.append([seed, int(a.size), *(float(np.percentile(a, q)) for q in (50, 25, 75, 95))])
    return rows


def read_series(path) -> dict[str, list[tuple[int, int, float]]]:
    out: dict[str, list] = {}
    for row in M.read_csv(path):
        out.setdefault(row["series"], []).append((int(row["window_start"]), int(row["window_end"]), float(row["value"])))
    return out


def _line_plot(rows: list[list], ylabel: str, title: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    by_series: dict[str, list] = {}
    for name, start, end, value in rows:
        by_series.setdefault(name, []).append((end, value))
    for name, pts in by_series.items():
        xs, ys = zip(*pts)
        if name == "median":
            ax.plot(xs, ys, "k-o", lw=2, label="median")
        else:
            ax.plot(xs, ys, "-o", lw=1, alpha=0.6, ms=3, label=name)
    ax.set_xlabel("episode (window end)")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def export_plots(in_dir, out_dir=None) -> dict[str, Path]:
    """Read ``per_window.csv`` and ``latency.csv`` from ``in_dir``; write PNGs plus their CSVs."""
    in_dir = Path(in_dir)
    out = Path(out_dir or in_dir)
    out.mkdir(parents=True, exist_ok=True)
    windows = M.windows_from_rows(M.read_csv(in_dir / "per_window.csv"))
    if not windows:
        raise ValueError(f"no window aggregates in {in_dir}")
    written = {}
    for attr, name, ylabel in (("collisions", "collisions", "collisions per 50 episodes"),
                               ("reward_per_adv", "reward", "reward per ADV per 50 episodes")):
        rows = series_rows(windows, attr)
        M.write_csv(out / f"plot_{name}.csv", SERIES_COLUMNS, rows)
        _line_plot(rows, ylabel, name, out / f"{name}.png")
        written[name] = out / f"{name}.png"

    samples: dict[int, list[float]] = {}
    lat_path = in_dir / "latency.csv"
    if lat_path.exists():
        for row in M.read_csv(lat_path):
            samples.setdefault(int(row["seed"]), []).append(float(row["seconds"]))
    M.write_csv(out / "plot_latency.csv", LATENCY_PLOT_COLUMNS, latency_plot_rows(samples))
    fig, ax = plt.subplots(figsize=(6, 4))
    if samples:
        seeds = sorted(samples)
        ax.boxplot([np.asarray(samples[s]) * 1e3 for s in seeds], showfliers=False)
        ax.set_xticks(range(1, len(seeds) + 1), [str(s) for s in seeds])
    ax.set_xlabel("seed")
    ax.set_ylabel("action latency (ms)")
    ax.set_title("latency")
    fig.tight_layout()
    fig.savefig(out / "latency.png", dpi=100)
    plt.close(fig)
    written["latency"] = out / "latency.png"
    return written
