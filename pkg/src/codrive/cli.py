"""Command line: ``codrive train | eval | plot``.

Exit codes: 0 ok, 2 configuration error, 3 contract violation, 4 training
halted (non-finite values), 5 unreadable or missing input/output.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .coddpg.checkpoint import load_checkpoint
from .errors import ConfigError, ContractViolation, TrainingHalted
from .harness import metrics as M
from .harness.experiment import RunError, evaluate, run_experiment, write_results
from .harness.scenario import apply_overrides, load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT, EXIT_HALTED, EXIT_IO = 0, 2, 3, 4, 5

log = logging.getLogger("codrive")


def parse_seeds(text: str, scenario_seeds) -> list[int]:
    """``5`` -> the first five scenario seeds (or 0..4 if it lists fewer); ``1,4`` -> exactly those."""
    try:
        if "," in text:
            return [int(s) for s in text.split(",") if s.strip()]
        n = int(text)
    except ValueError:
        raise ConfigError(f"bad --seeds value {text!r}") from None
    if n < 1:
        raise ConfigError("--seeds must be >= 1")
    seeds = list(scenario_seeds)
    return seeds[:n] if n <= len(seeds) else list(range(n))


def _scenario(args):
    sc = load_scenario(args.scenario)
    if args.set:
        sc = apply_overrides(sc, args.set)
    return sc


def cmd_train(args) -> int:
    sc = _scenario(args)
    seeds = parse_seeds(args.seeds, sc.seeds) if args.seeds else list(sc.seeds)
    res = run_experiment(sc, out_dir=args.out, seeds=seeds, deterministic=args.deterministic, workers=args.workers)
    for r in res["results"]:
        ws = r.windows
        if ws:
            log.info("seed %d: windows collisions %s", r.seed, [w.collisions for w in ws])
    print(f"wrote {res['out_dir']}")
    return EXIT_OK


def cmd_eval(args) -> int:
    sc = _scenario(args)
    actor, critic = load_checkpoint(args.checkpoint)
    res = evaluate(sc, actor, critic, episodes=args.episodes, seed=args.seed)
    eps = res.episodes
    lat = M.latency_summary(sec for ep in eps for _, sec in ep.latencies)
    n_adv = max(sc.world.n_adv, 1)
    mean_reward = sum(sum(ep.rewards.values()) for ep in eps) / max(len(eps), 1) / n_adv
    print(f"episodes {len(eps)}  collisions {sum(ep.collisions for ep in eps)}  "
          f"reward/ADV/episode {mean_reward:.3f}  latency median {lat['median']:.3e}s p95 {lat['p95']:.3e}s")
    if args.out:
        write_results(Path(args.out), [res])
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .harness.plots import export_plots  # matplotlib only when plotting

    written = export_plots(args.inp, args.out)
    for path in written.values():
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="codrive", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("--scenario", required=True, help="scenario file or bundled name (ci, ci_1adv, ...)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a scenario key")

    t = sub.add_parser("train", help="train every seed and write metrics CSVs and checkpoints")
    scenario_args(t)
    t.add_argument("--seeds", help="count or comma list (default: the scenario's list)")
    t.add_argument("--out", help="output directory (default: scenario out_dir)")
    t.add_argument("--deterministic", action="store_true", help="pin every RNG stream to (seed, episode)")
    t.add_argument("--workers", type=int, default=1, help="parallel seed processes")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="run a checkpoint greedily, no learning")
    scenario_args(e)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    pl = sub.add_parser("plot", help="collision, reward and latency figures from a run directory")
    pl.add_argument("--in", dest="inp", required=True)
    pl.add_argument("--out", help="figure directory (default: the input directory)")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunError as exc:
        code = EXIT_HALTED if isinstance(exc.cause, TrainingHalted) else EXIT_CONTRACT
        print(f"run aborted: {exc}", file=sys.stderr)
        return code
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except TrainingHalted as exc:
        print(f"training halted: {exc}", file=sys.stderr)
        return EXIT_HALTED
    except (OSError, ValueError) as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
