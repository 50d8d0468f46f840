from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation


@dataclass(frozen=True)
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    terminal: np.ndarray

    def __len__(self) -> int:
        return len(self.r)


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the oldest entry is overwritten first."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int = 3, dtype=np.float32):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim), dtype)
        self.a = np.zeros((capacity, action_dim), dtype)
        self.r = np.zeros(capacity, dtype)
        self.s_next = np.zeros((capacity, state_dim), dtype)
        self.terminal = np.zeros(capacity, bool)
        self.inserted = 0

    def __len__(self) -> int:
        return min(self.inserted, self.capacity)

    def add(self, s, a, r, s_next, terminal: bool) -> None:
        if not np.isfinite(r):
            raise ContractViolation(f"non-finite reward {r}")
        i = self.inserted % self.capacity
        self.s[i], self.a[i], self.r[i] = s, a, r
        self.s_next[i], self.terminal[i] = s_next, terminal
        self.inserted += 1

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        """Uniform minibatch without replacement."""
        size = len(self)
        if n > size:
            raise ContractViolation(f"cannot sample {n} from {size} transitions")
        idx = rng.choice(size, n, replace=False)
        return self.take(idx)

    def take(self, idx) -> Batch:
        return Batch(self.s[idx], self.a[idx], self.r[idx], self.s_next[idx], self.terminal[idx])

    def ordered(self) -> Batch:
        """All stored transitions, oldest first."""
        size = len(self)
        start = self.inserted % self.capacity if self.inserted > self.capacity else 0
        return self.take((start + np.arange(size)) % self.capacity)
