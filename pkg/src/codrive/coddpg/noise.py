from __future__ import annotations

import numpy as np


class OUNoise:
    """Ornstein-Uhlenbeck process, one independent channel per action dimension.

    Discrete update with unit time step: x <- x + theta * (mu - x) + sigma * N(0, 1).
    """

    def __init__(self, size: int, rng: np.random.Generator, theta=0.15, mu=0.0, sigma=0.2):
        self.size, self.rng = size, rng
        self.theta, self.mu, self.sigma = theta, mu, sigma
        self.reset()

    def reset(self) -> None:
        self.state = np.full(self.size, self.mu, dtype=float)

    def sample(self) -> np.ndarray:
        self.state = self.state + self.theta * (self.mu - self.state) + self.sigma * self.rng.standard_normal(self.size)
        return self.state.copy()

    def stationary_std(self) -> float:
        return self.sigma / np.sqrt(self.theta * (2 - self.theta))


def annealed_sigma(start: float, end: float, progress: float) -> float:
    """Linear schedule from ``start`` to ``end`` as progress goes 0 -> 1."""
    progress = min(max(progress, 0.0), 1.0)
    return start + (end - start) * progress
