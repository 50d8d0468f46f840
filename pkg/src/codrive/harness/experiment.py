"""Episode loop wiring the world, the VANET, the learners and distribution."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..coddpg.agent import DDPGAgent, encode_frame
from ..coddpg.checkpoint import save_checkpoint
from ..errors import ContractViolation
from ..paramdist import Mode, exchange_round, learn_or_wait, make_node
from ..reward import step_reward
from ..sim import Action, Kind, SensorFrame, Termination, World, grid_kinds
from ..vanet import Vanet
from . import metrics as M
from .ndv import NDVController
from .scenario import ScenarioConfig

log = logging.getLogger(__name__)

FAILURES = (Termination.ARRIVAL, Termination.REVERSAL, Termination.OFF_TRACK)


class RunError(RuntimeError):
    """A module contract failed mid-run; carries the coordinates."""

    def __init__(self, seed: int, episode: int, step: int, cause: Exception):
        super().__init__(f"seed {seed} episode {episode} step {step}: {type(cause).__name__}: {cause}")
        self.seed, self.episode, self.step, self.cause = seed, episode, step, cause


def measure_latency(agent: DDPGAgent, frame: SensorFrame, explore: bool = True):
    """Time from frame availability to action emission (selection only)."""
    t0 = time.perf_counter_ns()
    a = agent.act(encode_frame(frame), explore=explore)
    elapsed = time.perf_counter_ns() - t0
    return a, max(elapsed, 1) * 1e-9


def decide_adv(agent: DDPGAgent, frame: SensorFrame, explore: bool) -> tuple[Action, float]:
    """ADV decision path: sees only its own sensor frame."""
    a, seconds = measure_latency(agent, frame, explore)
    return Action.from_array(a), seconds


def episode_seed(seed: int, episode: int, salt: int = 0) -> list[int]:
    return [seed, episode, salt]


@dataclass
class SeedResult:
    seed: int
    episodes: list = field(default_factory=list)
    agents: dict = field(default_factory=dict)
    exchanges: int = 0
    adoptions: int = 0

    @property
    def windows(self) -> list:
        return M.aggregate_windows(self.episodes)


class Runner:
    """Runs all episodes of one seed. One instance per seed; single-threaded."""

    def __init__(self, scenario: ScenarioConfig, seed: int, deterministic: bool = True, learn: bool = True,
                 explore: bool = True, world: World | None = None, topology_path=None):
        self.sc = scenario
        self.seed = seed
        salt = 0 if deterministic else int.from_bytes(os.urandom(4), "little")
        self.salt = salt
        self.learn = learn
        self.explore = explore
        self.world = world if world is not None else World(scenario.world)
        cfg = scenario.world
        adv_ids = [i for i, kind in enumerate(grid_kinds(cfg)) if kind is Kind.ADV]
        tcfg = scenario.training
        self.agents = {}
        for vid in adv_ids:
            agent_cfg = type(tcfg)(**{**tcfg.__dict__, "seed": seed * 1_000_003 + salt})
            self.agents[vid] = DDPGAgent(agent_cfg, vid)
        self.nodes = {vid: make_node(a, scenario.distribution, scenario.budget_init) for vid, a in self.agents.items()}
        self.vanet = Vanet(scenario.vanet)
        self.topology = open(topology_path, "w") if topology_path else None
        self.result = SeedResult(seed, agents=self.agents)
        self._latency_seen = 0
        self.n_vehicles = cfg.n_adv + cfg.n_ndv
        self._done = False

    def run(self) -> SeedResult:
        try:
            for ep in range(self.sc.episodes):
                self.result.episodes.append(self.run_episode(ep))
        finally:
            if self.topology:
                self.topology.close()
        return self.result

    def _distance(self, a: int, b: int) -> float:
        return self.world.relative_distance(a, b)

    def run_episode(self, ep: int) -> M.EpisodeMetrics:
        sc, world = self.sc, self.world
        world.reset(seed=episode_seed(self.seed, ep, self.salt), episode=ep + 1)
        self.vanet.initialize(self.agents)
        for node in self.nodes.values():
            node.budget += sc.budget_replenish
        for agent in self.agents.values():
            agent.begin_episode(ep, sc.episodes)
        ndv = {
            vid: NDVController.for_dynamics(v.target_speed, sc.world.dynamics, k_trackpos=sc.ndv_k_trackpos,
                                            k_angle=sc.ndv_k_angle, k_speed=sc.ndv_k_speed)
            for vid, v in world.vehicles.items() if v.kind is Kind.NDV
        }
        metrics = M.EpisodeMetrics(ep + 1, rewards={vid: 0.0 for vid in self.agents},
                                   arrived={vid: False for vid in self.agents})
        frames = {vid: self._sense(vid) for vid in world.alive_ids()}
        states = {vid: encode_frame(frames[vid]) for vid in self.agents}
        t = 0
        for t in range(1, sc.T + 1):
            try:
                self._step(t, ep, frames, states, ndv, metrics)
            except ContractViolation as exc:
                raise RunError(self.seed, ep + 1, t, exc) from exc
            alive = len(world.alive_ids())
            assert alive + sum(1 for v in world.vehicles.values() if not v.alive) == self.n_vehicles
            if self._done:
                break
        metrics.steps = t
        return metrics

    def _sense(self, vid: int):
        # ADVs get the full sensor frame; scripted traffic only needs its lane state
        return self.world.sense(vid) if vid in self.agents else self.world.sense_lane(vid)

    def _step(self, t, ep, frames, states, ndv, metrics) -> None:
        sc, world = self.sc, self.world
        acting = [vid for vid in self.agents if world.vehicles[vid].alive]
        actions, taken = {}, {}
        for vid in acting:
            action, seconds = decide_adv(self.agents[vid], frames[vid], self.explore)
            self._latency_seen += 1
            if self._latency_seen > sc.latency_warmup:
                metrics.latencies.append((vid, seconds))
            actions[vid] = action
            taken[vid] = action.to_array()
        for vid, ctrl in ndv.items():
            if world.vehicles[vid].alive:
                actions[vid] = ctrl(frames[vid])
        world.step(actions)
        events = world.check_collisions()
        metrics.collisions += sum(1 for e in events if e.a in self.agents or e.b in self.agents)
        new_frames = {vid: self._sense(vid) for vid in world.alive_ids()}
        verdict = world.episode_terminated(sc.T)
        frames.clear()
        frames.update({vid: f for vid, f in new_frames.items() if world.vehicles[vid].alive})

        # reward, then network upkeep and distribution, then store and learn
        outcomes = {}
        for vid in acting:
            reason = verdict.newly_terminated.get(vid)
            arrived = reason is Termination.ARRIVAL
            br = step_reward(new_frames[vid], arrived, sc.reward)
            metrics.rewards[vid] += br.r
            if arrived:
                metrics.arrived[vid] = True
                metrics.arrival_step[vid] = t
            self.nodes[vid].window.append(br.r)
            outcomes[vid] = (br.r, encode_frame(new_frames[vid]), reason in FAILURES)

        for vid, reason in verdict.newly_terminated.items():
            if vid in self.vanet.members and self.vanet.members[vid].in_vanet:
                self.vanet.leave(vid)
        scanning = {vid: frames[vid].opponents for vid in self.agents if vid in frames}
        budgets = {vid: node.budget for vid, node in self.nodes.items()}
        self.vanet.scan(scanning, self._distance, budgets, t)
        if self.topology:
            for line in self.vanet.topology_lines():
                self.topology.write(f"{ep + 1},{line}\n")
        if sc.distribution_enabled and self.learn and sc.distribution.triggers(t):
            info = exchange_round(self.nodes, self.vanet, t, ep + 1, sc.distribution)
            self.result.exchanges += info["sent"]
            self.result.adoptions += len(info["adopted"])

        for vid, (r, s_next, terminal) in outcomes.items():
            agent = self.agents[vid]
            if self.learn:
                agent.observe(states[vid], taken[vid], r, s_next, terminal)
                node = self.nodes[vid]
                leader = bool(self.vanet.followers_of(vid))
                if learn_or_wait(leader, node.budget, sc.distribution) is Mode.LEARN:
                    if agent.learn() is not None:
                        node.budget = max(0.0, node.budget - 1)
            states[vid] = s_next
        self._done = verdict.done


def run_seed(scenario: ScenarioConfig, seed: int, deterministic: bool = True, **kw) -> SeedResult:
    return Runner(scenario, seed, deterministic, **kw).run()


def _run_seed_job(args):
    scenario, seed, deterministic, topo = args
    res = run_seed(scenario, seed, deterministic, topology_path=topo)
    return res


def run_experiment(scenario: ScenarioConfig, out_dir=None, seeds=None, deterministic: bool = True,
                   workers: int = 1, save_checkpoints: bool = True) -> dict:
    """Train every seed and write per-episode, per-window, latency and summary CSVs."""
    out = Path(out_dir or scenario.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(seeds if seeds is not None else scenario.seeds)
    jobs = [(scenario, s, deterministic, out / f"topology_seed{s}.csv" if scenario.topology_dump else None)
            for s in seeds]
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_seed_job, jobs))
    else:
        results = [_run_seed_job(j) for j in jobs]
    write_results(out, results)
    if save_checkpoints:
        for res in results:
            for vid, agent in res.agents.items():
                save_checkpoint(out / f"seed{res.seed}_adv{vid}.ckpt", agent.actor, agent.critic)
    return {"out_dir": out, "results": results}


def write_results(out: Path, results: list[SeedResult]) -> None:
    ep_rows, win_rows, lat_rows = [], [], []
    for res in results:
        ep_rows += M.episode_rows(res.seed, res.episodes)
        win_rows += M.window_rows(res.seed, res.windows)
        lat_rows += M.latency_rows(res.seed, res.episodes)
    M.write_csv(out / "per_episode.csv", M.EPISODE_COLUMNS, ep_rows)
    M.write_csv(out / "per_window.csv", M.WINDOW_COLUMNS, win_rows)
    M.write_csv(out / "latency.csv", M.LATENCY_COLUMNS, lat_rows)
    M.write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows(results))


SUMMARY_COLUMNS = ["window_start", "window_end", "collisions_median", "reward_per_adv_median", "n_seeds"]


def summary_rows(results: list[SeedResult]) -> list[list]:
    per_seed = [res.windows for res in results]
    rows = []
    if not per_seed or not per_seed[0]:
        return rows
    for i, w in enumerate(per_seed[0]):
        col = [ws[i] for ws in per_seed if i < len(ws)]
        rows.append([w.start, w.end, float(np.median([c.collisions for c in col])),
                     float(np.median([c.reward_per_adv for c in col])), len(col)])
    return rows


def evaluate(scenario: ScenarioConfig, actor, critic, episodes: int | None = None, seed: int = 0) -> SeedResult:
    """Run the scenario with fixed parameters: no exploration, no learning."""
    runner = Runner(scenario, seed, learn=False, explore=False)
    for agent in runner.agents.values():
        agent.adopt(actor, critic)
    n = scenario.episodes if episodes is None else episodes
    for ep in range(n):
        runner.result.episodes.append(runner.run_episode(ep))
    return runner.result
