"""Actor-critic learner with replay, target networks and OU exploration."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConfigError, TrainingHalted
from ..sim import FRAME_DIM, SensorFrame
from .nets import MLP, NetKind, check_same_shapes, make_optimizer, soft_update
from .noise import OUNoise, annealed_sigma
from .replay import Batch, ReplayBuffer

ACTION_DIM = 3
ACTION_LOW = np.array([0.0, 0.0, -1.0])
ACTION_HIGH = np.array([1.0, 1.0, 1.0])

# fixed per-channel scaling of the raw sensor vector
_SCALE = np.concatenate(
    [
        [1 / np.pi],
        np.full(36, 1 / 200.0),
        np.full(19, 1 / 200.0),
        [1.0, 1 / 100.0, 1 / 100.0, 1 / 100.0, 1 / 10000.0],
        np.full(4, 1 / 100.0),
    ]
)


def encode_frame(frame: SensorFrame) -> np.ndarray:
    """Flatten a sensor frame into the learner's state vector."""
    return frame.to_vector() * _SCALE


@dataclass
class TrainingConfig:
    gamma: float = 0.99
    tau: float = 0.001
    lr_actor: float = 1e-4
    lr_critic: float = 1e-4
    batch_size: int = 32
    buffer_capacity: int = 100_000
    hidden: tuple = (300, 400)
    optimizer: str = "sgd"
    ou_theta: float = 0.15
    ou_mu: tuple = (0.0, 0.0, 0.0)  # per action dimension (accel, brake, steering)
    ou_sigma: float = 0.2
    ou_sigma_end: float = 0.05
    noise_gain: tuple = (1.0, 1.0, 1.0)  # per-dimension multiplier on sigma
    anneal_episodes: int = 0  # 0: let the harness use the episode count
    reward_scale: float = 1.0
    reward_clip: float = 0.0  # >0: clip scaled rewards to [-clip, clip] before storing
    final_init: float = 3e-3
    preact_penalty: float = 0.0  # L2 weight on the actor head's pre-activation
    reset_optimizer_on_adopt: bool = False  # False: adopted parameters continue with the current moments
    seed: int = 0
    dtype: str = "float32"

    def validate(self) -> "TrainingConfig":
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma={self.gamma} outside [0, 1)")
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau={self.tau} outside (0, 1)")
        if self.reward_clip < 0:
            raise ConfigError("reward_clip must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")
        if self.buffer_capacity < self.batch_size:
            raise ConfigError("buffer smaller than one minibatch")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if len(self.ou_mu) != ACTION_DIM or len(self.noise_gain) != ACTION_DIM:
            raise ConfigError(f"ou_mu and noise_gain need {ACTION_DIM} entries")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"unsupported dtype {self.dtype!r}")
        return self


def build_networks(cfg: TrainingConfig, rng: np.random.Generator, state_dim: int = FRAME_DIM):
    dtype = np.dtype(cfg.dtype)
    hidden = list(cfg.hidden)
    actor = MLP.build([state_dim, *hidden, ACTION_DIM], NetKind.ACTOR, rng, dtype, final_scale=cfg.final_init)
    critic = MLP.build([state_dim + ACTION_DIM, *hidden, 1], NetKind.CRITIC, rng, dtype)
    return actor, critic


# -- gradient computations (shared by the agent and its tests) -------------


def critic_loss_and_grads(critic: MLP, s: np.ndarray, a: np.ndarray, y: np.ndarray):
    """L = mean((y - Q(s, a))^2) and its parameter gradients."""
    q, cache = critic.forward(np.concatenate([s, a], axis=1), keep=True)
    q = q[:, 0]
    err = y.astype(q.dtype) - q
    n = len(y)
    loss = float(np.mean(err * err))
    grads, _ = critic.backward(cache, (-2.0 / n * err)[:, None])
    return loss, grads


def actor_objective_and_grads(actor: MLP, critic: MLP, s: np.ndarray, preact_penalty: float = 0.0):
    """J = mean(Q(s, mu(s))) - lambda * mean(|z|^2) and dJ/d(actor params), critic held fixed.

    ``z`` is the actor head's pre-activation; the penalty keeps the squashing
    functions out of saturation, where their gradient vanishes.
    """
    mu, a_cache = actor.forward(s, keep=True)
    state_dim = s.shape[1]
    q, c_cache = critic.forward(np.concatenate([s.astype(mu.dtype), mu], axis=1), keep=True)
    n = len(s)
    _, dq_dx = critic.backward(c_cache, np.full((n, 1), 1.0 / n, dtype=q.dtype))
    dq_da = dq_dx[:, state_dim:]
    objective = float(np.mean(q))
    extra = None
    if preact_penalty:
        z = a_cache[-1][1]
        objective -= preact_penalty * float(np.sum(z * z)) / n
        extra = (-2.0 * preact_penalty / n) * z
    grads, _ = actor.backward(a_cache, dq_da, extra)
    return objective, grads


def _check_finite(value, grads, what: str) -> None:
    # a single reduction per array: any nan/inf propagates into the sum
    if not np.isfinite(value) or not np.isfinite(sum(float(np.add.reduce(g, axis=None)) for g in grads)):
        raise TrainingHalted(f"non-finite {what}")


class DDPGAgent:
    def __init__(self, cfg: TrainingConfig, agent_id: int = 0, state_dim: int = FRAME_DIM):
        self.cfg = cfg.validate()
        self.id = agent_id
        self.rng = np.random.default_rng([cfg.seed, agent_id])
        self.actor, self.critic = build_networks(cfg, self.rng, state_dim)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.buffer = ReplayBuffer(cfg.buffer_capacity, state_dim, ACTION_DIM, np.dtype(cfg.dtype))
        self.noise = OUNoise(ACTION_DIM, self.rng, cfg.ou_theta, np.asarray(cfg.ou_mu, dtype=float),
                             cfg.ou_sigma * np.asarray(cfg.noise_gain, dtype=float))
        self._make_optimizers()
        self.gradient_steps = 0

    def _make_optimizers(self) -> None:
        self.actor_opt = make_optimizer(self.cfg.optimizer, self.actor.params(), self.cfg.lr_actor)
        self.critic_opt = make_optimizer(self.cfg.optimizer, self.critic.params(), self.cfg.lr_critic)

    # -- acting ---------------------------------------------------------

    def begin_episode(self, episode: int, total_episodes: int | None = None) -> None:
        """Reset the exploration process and set this episode's noise scale."""
        horizon = self.cfg.anneal_episodes or total_episodes or 1
        sigma = annealed_sigma(self.cfg.ou_sigma, self.cfg.ou_sigma_end, episode / max(horizon - 1, 1))
        self.noise.sigma = sigma * np.asarray(self.cfg.noise_gain, dtype=float)
        # the mean bias shrinks with the noise scale
        shrink = sigma / self.cfg.ou_sigma if self.cfg.ou_sigma > 0 else 0.0
        self.noise.mu = np.asarray(self.cfg.ou_mu, dtype=float) * shrink
        self.noise.reset()

    def policy(self, s: np.ndarray) -> np.ndarray:
        return self.actor.forward(s)[0].astype(float)

    def act(self, s: np.ndarray, explore: bool = True) -> np.ndarray:
        a = self.policy(s)
        if explore:
            a = a + self.noise.sample()
        return np.clip(a, ACTION_LOW, ACTION_HIGH)

    # -- learning -------------------------------------------------------

    def observe(self, s, a, r: float, s_next, terminal: bool) -> None:
        r = r * self.cfg.reward_scale
        if self.cfg.reward_clip > 0:
            r = min(max(r, -self.cfg.reward_clip), self.cfg.reward_clip)
        self.buffer.add(s, a, r, s_next, terminal)

    def critic_targets(self, batch: Batch) -> np.ndarray:
        mu_next = self.target_actor.forward(batch.s_next)
        q_next = self.target_critic.forward(np.concatenate([batch.s_next, mu_next], axis=1))[:, 0]
        bootstrap = np.where(batch.terminal, 0.0, q_next)
        return (batch.r + self.cfg.gamma * bootstrap).astype(q_next.dtype)

    def critic_update(self, batch: Batch, y: np.ndarray) -> float:
        loss, grads = critic_loss_and_grads(self.critic, batch.s, batch.a, y)
        _check_finite(loss, grads, "critic loss")
        self.critic_opt.step(grads)
        return loss

    def actor_update(self, batch: Batch) -> float:
        objective, grads = actor_objective_and_grads(self.actor, self.critic, batch.s, self.cfg.preact_penalty)
        _check_finite(objective, grads, "actor gradient")
        # ascent on J == descent on -J
        self.actor_opt.step([-g for g in grads])
        return objective

    def update_targets(self) -> None:
        soft_update(self.target_critic, self.critic, self.cfg.tau)
        soft_update(self.target_actor, self.actor, self.cfg.tau)

    def learn(self) -> dict | None:
        """One minibatch update; returns None during warm-up (buffer < N)."""
        if len(self.buffer) < self.cfg.batch_size:
            return None
        batch = self.buffer.sample(self.cfg.batch_size, self.rng)
        y = self.critic_targets(batch)
        loss = self.critic_update(batch, y)
        objective = self.actor_update(batch)
        self.update_targets()
        self.gradient_steps += 1
        return {"critic_loss": loss, "actor_objective": objective}

    def train_episode_step(self, s: np.ndarray, env_hook: Callable, learn: bool = True):
        """select -> act -> observe -> store -> update, in that order.

        ``env_hook(action)`` must return ``(reward, next_state, terminal)``.
        """
        a = self.act(s)
        r, s_next, terminal = env_hook(a)
        self.observe(s, a, r, s_next, terminal)
        info = self.learn() if learn else None
        return a, r, s_next, terminal, info

    # -- parameter exchange ---------------------------------------------

    def snapshot(self) -> tuple[MLP, MLP]:
        return self.actor.copy(), self.critic.copy()

    def adopt(self, actor: MLP, critic: MLP) -> None:
        """Replace mains and targets wholesale; the previous set survives any shape error."""
        check_same_shapes(self.actor, actor)
        check_same_shapes(self.critic, critic)
        dtype = self.actor.dtype
        new_actor, new_critic = actor.astype(dtype), critic.astype(dtype)
        self.actor, self.critic = new_actor, new_critic
        self.target_actor, self.target_critic = new_actor.copy(), new_critic.copy()
        if self.cfg.reset_optimizer_on_adopt:
            self._make_optimizers()
        else:
            self.actor_opt.rebind(self.actor.params())
            self.critic_opt.rebind(self.critic.params())
