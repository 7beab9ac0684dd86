from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    indices: np.ndarray

    def __len__(self):
        return len(self.rewards)


class ReplayMemory:
    """Fixed-capacity FIFO store of transitions backed by ring arrays."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.states = np.zeros((self.capacity, state_dim))
        self.actions = np.zeros((self.capacity, action_dim))
        self.rewards = np.zeros(self.capacity)
        self.next_states = np.zeros((self.capacity, state_dim))
        self.dones = np.zeros(self.capacity, dtype=bool)
        self.inserted = 0  # total pushes ever

    def __len__(self):
        return min(self.inserted, self.capacity)

    def push(self, state, action, reward, next_state, done) -> None:
        k = self.inserted % self.capacity
        self.states[k] = state
        self.actions[k] = action
        self.rewards[k] = reward
        self.next_states[k] = next_state
        self.dones[k] = done
        self.inserted += 1

    def _order(self) -> np.ndarray:
        n = len(self)
        start = self.inserted - n
        return np.arange(start, self.inserted) % self.capacity

    def transitions(self):
        """Stored transitions, oldest first."""
        return [(self.states[k], self.actions[k], self.rewards[k], self.next_states[k],
                 bool(self.dones[k])) for k in self._order()]

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch | None:
        """Uniform draw without replacement; None when fewer than ``batch_size`` are stored."""
        n = len(self)
        if n < batch_size:
            return None
        idx = rng.choice(n, size=batch_size, replace=False)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.dones[idx], idx)
