"""Acceptance criteria 1-9, each checked at its stated tolerance and runtime budget.

Every criterion prints one PASS/FAIL line; the lines are repeated in the
pytest terminal summary. Criteria 7 and 8 train the bundled ``ci`` and
``ci_1adv`` scenarios on 5 seeds (about half an hour on one core). Select the
fast ones with ``-m "not slow"``. Set ``CODRIVE_ACCEPTANCE_OUT`` to keep the
metrics CSVs of the learning runs.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from codrive.coddpg import DDPGAgent, MLP, ReplayBuffer, TrainingConfig, actor_objective_and_grads, critic_loss_and_grads, soft_update
from codrive.coddpg.checkpoint import load_checkpoint, save_checkpoint
from codrive.harness import metrics as M
from codrive.harness.experiment import run_experiment
from codrive.harness.scenario import load_scenario, parse_scenario
from codrive.paramdist import DistributionPolicy, Mode, ParameterPacket, Role, exchange_round, receive_and_select
from codrive.reward import RewardConfig, collision_term, on_road_term, safe_distance, time_term, total_reward
from codrive.sim import Kind, World, WorldConfig
from codrive.vanet import Vanet, VanetConfig
from test_coddpg import fd_grad, max_rel_err, tiny_pair
from test_paramdist import packet, same_params, static_round_setup
from test_sim import brute_force_opponents, empty_world, straight_mid
from test_vanet import check_invariants, dist_fn, opponent_readings
from test_reward import si_safe_distance


class Criterion:
    """Context manager: collect failures, time the block, emit the line."""

    def __init__(self, record, number, budget):
        self.record, self.number, self.budget = record, number, budget
        self.failures, self.notes = [], []

    def check(self, ok, what):
        if not ok:
            self.failures.append(what)

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        seconds = time.perf_counter() - self.t0
        if exc is not None:
            self.failures.append(f"{exc_type.__name__}: {exc}")
        if seconds >= self.budget:
            self.failures.append("over runtime budget")
        ok = not self.failures
        detail = "; ".join(self.notes + ([] if ok else ["failed: " + ", ".join(self.failures)]))
        self.record(self.number, ok, detail or "all checks hold", seconds, self.budget)
        if exc is None:
            assert ok, detail
        return False


def rel_close(a, b, tol=1e-9):
    return math.isclose(a, b, rel_tol=tol, abs_tol=0.0) or a == b


def test_criterion_1_reward_exactness(record):
    cfg = RewardConfig()
    with Criterion(record, 1, 5.0) as c:
        c.check(rel_close(safe_distance(54.0, cfg), 26.25), "safeDistance 26.25")
        c.check(rel_close(collision_term(20.0, 26.25, cfg), -6250.0), "collisionTerm -6250")
        c.check(rel_close(time_term(True, 50.0, 0.3, cfg), 10_000.0), "timeTerm 10000")
        c.check(rel_close(time_term(False, 50.0, math.pi / 6, cfg), 25_000.0), "timeTerm 25000")
        c.check(rel_close(on_road_term(50.0, 0.0, 0.0, cfg), -50.0), "onRoadTerm -50")
        c.check(rel_close(on_road_term(50.0, math.pi / 2, -1.0, cfg), 100.0), "onRoadTerm 100")
        c.check(rel_close(total_reward(-6250.0, 0.0, -50.0, cfg).r, -3760.0), "totalReward -3760")
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(10_000):
            v, T_s = rng.uniform(0, 200), rng.uniform(0, 2)
            a_0 = rng.uniform(0.5, 8)
            a_max = rng.uniform(a_0, 12)
            got = safe_distance(v, RewardConfig(T_s=T_s, a_0=a_0, a_max=a_max))
            want = si_safe_distance(v, T_s, a_0, a_max)
            worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
        c.check(worst <= 1e-9, f"SI oracle rel err {worst:.2e}")
        c.notes.append(f"7 examples exact, SI oracle max rel err {worst:.1e} over 1e4 draws")


def test_criterion_2_gradient_correctness(record):
    with Criterion(record, 2, 30.0) as c:
        worst_c = worst_a = 0.0
        for seed in range(20):
            rng = np.random.default_rng(5000 + seed)
            hidden = tuple(int(h) for h in rng.integers(2, 8, size=2))
            actor, critic = tiny_pair(rng, state_dim=int(rng.integers(2, 6)), hidden=hidden)
            s = rng.normal(size=(6, actor.in_dim))
            a = rng.uniform(-1, 1, size=(6, 3))
            y = rng.normal(size=6)
            _, g = critic_loss_and_grads(critic, s, a, y)
            worst_c = max(worst_c, max_rel_err(g, fd_grad(lambda: critic_loss_and_grads(critic, s, a, y)[0],
                                                          critic.params())))
            _, g = actor_objective_and_grads(actor, critic, s)
            worst_a = max(worst_a, max_rel_err(g, fd_grad(lambda: actor_objective_and_grads(actor, critic, s)[0],
                                                          actor.params())))
        c.check(worst_c < 1e-5, f"critic {worst_c:.1e}")
        c.check(worst_a < 1e-5, f"actor {worst_a:.1e}")
        c.notes.append(f"20 nets, float64: critic max rel err {worst_c:.1e}, actor {worst_a:.1e}")


def test_criterion_3_ddpg_algebra(record):
    with Criterion(record, 3, 5.0) as c:
        agent = DDPGAgent(TrainingConfig(hidden=(8, 8), batch_size=4, buffer_capacity=64, seed=3))
        for main, target in ((agent.actor, agent.target_actor), (agent.critic, agent.target_critic)):
            c.check(all(np.array_equal(p, q) for p, q in zip(main.params(), target.params())), "target init")
        rng = np.random.default_rng(0)
        for tau, expected in ((0.0, 0.0), (1.0, 1.0), (0.001, 0.001)):
            tgt, src = MLP.build([3, 2], agent.critic.kind, rng, np.float64), None
            src = tgt.copy()
            for p in tgt.params():
                p[...] = 0.0
            for p in src.params():
                p[...] = 1.0
            soft_update(tgt, src, tau)
            c.check(all(np.all(p == expected) for p in tgt.params()), f"softUpdate tau={tau}")
        cap, k = 16, 5
        buf = ReplayBuffer(cap, 1, 3, np.float64)
        for i in range(cap + k):
            buf.add([i], np.zeros(3), float(i), [i], False)
        c.check(buf.ordered().r.tolist() == list(range(k, cap + k)), "FIFO")
        before = [p.copy() for p in agent.actor.params() + agent.critic.params()]
        hook = lambda a: (1.0, rng.normal(size=65), False)
        infos = [agent.train_episode_step(rng.normal(size=65), hook)[-1] for _ in range(3)]
        c.check(all(i is None for i in infos), "warm-up returns no update")
        c.check(all(np.array_equal(p, q) for p, q in zip(before, agent.actor.params() + agent.critic.params())),
                "warm-up leaves parameters")
        c.check(agent.train_episode_step(rng.normal(size=65), hook)[-1] is not None, "first update at N")
        c.notes.append("target init, softUpdate tau in {0, 1, 0.001}, FIFO after capacity+5, warm-up rule")


def test_criterion_4_vanet_properties(record):
    with Criterion(record, 4, 30.0) as c:
        rng = np.random.default_rng(4)
        n, radius = 10, 200.0
        pos = {i: rng.uniform(0, 700, 2) for i in range(n)}
        vel = {i: rng.normal(0, 8, 2) for i in range(n)}
        budgets = {i: float(rng.integers(0, 3)) for i in range(n)}
        net = Vanet(VanetConfig(radius))
        net.initialize(range(n))
        for t in range(1, 1001):
            for i in range(n):
                vel[i] = 0.9 * vel[i] + rng.normal(0, 3, 2)
                pos[i] = np.clip(pos[i] + vel[i], 0, 700)
            frames = {vid: opponent_readings(pos, vid) for vid in pos}
            net.scan(frames, dist_fn(pos), budgets, t)
            check_invariants(net, pos, radius)
        chain = Vanet()
        chain.initialize("ABC")
        table = {("A", "B"): 100.0, ("B", "C"): 100.0, ("A", "C"): 250.0}
        chain.identify_neighbors("ABC", lambda a, b: table[(a, b)])
        c.check({(e.a, e.b) for e in chain.edges()} == {("A", "B"), ("B", "C")}, "chain example")
        c.notes.append("symmetry, radius, closure, role antisymmetry over 1000 steps x 10 vehicles; chain example")


def test_criterion_5_distribution_protocol(record):
    with Criterion(record, 5, 10.0) as c:
        me = DDPGAgent(TrainingConfig(hidden=(4,), buffer_capacity=64, batch_size=8), 99, state_dim=5)

        def select(own, avgs):
            return receive_and_select(own, [packet(i, a) for i, a in enumerate(avgs)], Mode.LEARN, me.actor, me.critic)

        d, _ = select(5.0, [7.0, 3.0])
        c.check(d.adopted is not None and d.adopted.average_reward == 7.0, "two-leader example adopts 7")
        d, _ = select(5.0, [5.0])
        c.check(d.adopted is None, "strict tie keeps own")
        d, _ = select(9.0, [7.0])
        c.check(d.adopted is None and d.forward, "own-superior forwards")
        rng = np.random.default_rng(55)
        for _ in range(200):
            own, avgs = rng.normal(0, 10), list(rng.normal(0, 10, int(rng.integers(1, 5))))
            c.check(select(own, avgs)[0].tag == max(own, *avgs), "max-adoption")
        rounds_needed = 0
        for best in range(6):
            for bseed in range(3):
                b = np.random.default_rng(bseed).permutation(6) + 1
                net, nodes = static_round_setup(6, best, {i: float(x) for i, x in enumerate(b)})
                target = nodes[best].agent.actor.copy()
                for period in range(1, 6):
                    exchange_round(nodes, net, 100 * period, 1, DistributionPolicy())
                    if all(same_params(nd.agent.actor, target) for nd in nodes.values()):
                        rounds_needed = max(rounds_needed, period)
                        break
                else:
                    c.check(False, f"line graph did not converge (best={best})")
        c.notes.append(f"two-leader example adopts 7, ties keep own, forwarding, max-adoption; 6-node line converges in "
                       f"<= {rounds_needed} trigger periods")


def test_criterion_6_sensor_geometry(record):
    with Criterion(record, 6, 10.0) as c:
        rng = np.random.default_rng(66)
        worst = 0.0
        for _ in range(100):
            w = empty_world()
            for _ in range(int(rng.integers(2, 6))):
                w.add_vehicle(Kind.NDV, s=float(rng.uniform(0, 150)), d_lat=float(rng.uniform(-5.5, 5.5)), v=40.0,
                              psi=float(rng.uniform(-0.5, 0.5)))
            for vid in w.vehicles:
                f = w.sense(vid)
                oracle = brute_force_opponents(w, vid)
                worst = max(worst, float(np.max(np.abs(f.opponents - oracle))))
                c.check(np.all(f.opponents <= 200.0) and np.all(f.track <= 200.0), "readings <= 200")
        c.check(worst <= 1e-9, f"oracle mismatch {worst:.1e}")
        w = World(WorldConfig(track="road_course", track_length=3186.0, track_width=15.0, n_adv=0, n_ndv=0))
        w.reset(seed=0)
        veh = w.add_vehicle(Kind.ADV, s=straight_mid(w.track), d_lat=0.0, v=40.0)
        f = w.sense(veh.id)
        c.check(math.isclose(f.track[0], 7.5, abs_tol=1e-9) and math.isclose(f.track[-1], 7.5, abs_tol=1e-9),
                "half-width ray 7.5")
        c.notes.append(f"100 scenes match brute force (max abs diff {worst:.1e} m); side rays 7.5 m; all <= 200")


# -- learning trends ---------------------------------------------------------------------------


def _learning_out(name):
    root = os.environ.get("CODRIVE_ACCEPTANCE_OUT")
    return Path(root) / name if root else None


@pytest.fixture(scope="module")
def ci_runs(tmp_path_factory):
    """Train ``ci`` and ``ci_1adv`` once (5 seeds each); shared by criteria 7 and 8."""
    runs = {}
    for name in ("ci", "ci_1adv"):
        sc = load_scenario(name)
        out = _learning_out(name) or tmp_path_factory.mktemp(name)
        t0 = time.perf_counter()
        res = run_experiment(sc, out, save_checkpoints=False)
        runs[name] = (sc, res["results"], time.perf_counter() - t0)
    return runs


def _fifth_sums(result):
    c = [ep.collisions for ep in result.episodes]
    n = max(len(c) // 5, 1)
    return sum(c[:n]), sum(c[-n:])


@pytest.mark.slow
def test_criterion_7_learning_trend(record, ci_runs):
    sc, results, seconds = ci_runs["ci"]
    with Criterion(record, 7, 1800.0) as c:
        c.t0 -= seconds  # charge the training time
        c.check(sc.world.n_adv == 2 and sc.world.n_ndv == 3 and sc.episodes == 300 and len(results) == 5,
                "scenario shape")
        firsts, lasts = zip(*(_fifth_sums(r) for r in results))
        med_first, med_last = float(np.median(firsts)), float(np.median(lasts))
        c.check(med_last <= 0.5 * med_first, f"collisions last/first {med_last}/{med_first}")
        wins = [r.windows for r in results]
        first_w = float(np.median([w[0].reward_per_adv for w in wins]))
        last_w = float(np.median([w[-1].reward_per_adv for w in wins]))
        c.check(last_w > first_w, f"window reward {first_w:.4g} -> {last_w:.4g}")
        c.notes.append(f"median collisions first 20% {med_first:g} -> last 20% {med_last:g} "
                       f"(per seed {list(firsts)} -> {list(lasts)}); median window reward {first_w:.4g} -> "
                       f"{last_w:.4g}")


@pytest.mark.slow
def test_criterion_8_cooperation_benefit(record, ci_runs):
    _, two, s2 = ci_runs["ci"]
    sc1, one, s1 = ci_runs["ci_1adv"]
    with Criterion(record, 8, 3600.0) as c:
        c.t0 -= s1 + s2
        c.check(sc1.world.n_adv == 1 and len(one) == 5, "scenario shape")

        def first_zero(results):
            return [M.first_zero_collision_window(r.windows) or math.inf for r in results]

        z2, z1 = first_zero(two), first_zero(one)
        m2, m1 = float(np.median(z2)), float(np.median(z1))
        c.check(math.isfinite(m2), "2-ADV median never reaches a zero-collision window")
        c.check(m2 <= m1, f"2-ADV {m2} > 1-ADV {m1}")
        c.notes.append(f"first zero-collision window start, median 2-ADV {m2:g} vs 1-ADV {m1:g} "
                       f"(per seed {z2} vs {z1})")


def test_criterion_9_determinism_and_round_trip(record, tmp_path):
    with Criterion(record, 9, 300.0) as c:
        sc = parse_scenario("""
        episodes = 4
        seeds = 0,1
        world.T = 80
        training.hidden = 16,16
        training.batch_size = 16
        distribution.trigger_step = 20
        """)
        for d in ("a", "b"):
            run_experiment(sc, tmp_path / d)
        for name in ("per_episode.csv", "per_window.csv", "summary.csv"):
            c.check((tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name)
        actor, critic = load_checkpoint(tmp_path / "a" / "seed0_adv0.ckpt")
        save_checkpoint(tmp_path / "again.ckpt", actor, critic)
        c.check((tmp_path / "again.ckpt").read_bytes() == (tmp_path / "a" / "seed0_adv0.ckpt").read_bytes(),
                "checkpoint round trip")
        p = ParameterPacket.build(7, Role.LEADER, -0.123456789, 3, 200, actor, critic)
        q = ParameterPacket.from_bytes(p.to_bytes())
        a2, c2 = q.networks()
        c.check(q.to_bytes() == p.to_bytes() and q.average_reward == p.average_reward, "packet bytes")
        c.check(same_params(a2, actor) and same_params(c2, critic), "packet networks")
        c.notes.append("repeat runs byte-identical (per-episode, per-window, summary); checkpoint and packet "
                       "round trips bit-exact")
