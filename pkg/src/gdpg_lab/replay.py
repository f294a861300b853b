"""Uniform experience replay with FIFO eviction."""

from __future__ import annotations

import numpy as np


def sample_indices_without_replacement(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Floyd's algorithm: k distinct indices from range(n), one generator call."""
    if k > n:
        raise ValueError(f"cannot draw {k} distinct indices from {n}")
    # floor(u * (j + 1)) is uniform over 0..j for each candidate slot j.
    draws = (rng.random(k) * np.arange(n - k + 1, n + 1)).astype(np.int64)
    chosen: set[int] = set()
    out = np.empty(k, dtype=np.int64)
    for pos in range(k):
        t = int(draws[pos])
        if t in chosen:
            t = n - k + pos
        chosen.add(t)
        out[pos] = t
    return out


class ReplayBuffer:
    """Ring of (s, a, r, s', done) transitions in preallocated float64 arrays."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.size = 0
        self._head = 0

    def add(self, s, a, r, s_next, done) -> None:
        i = self._head
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s_next
        self.dones[i] = 1.0 if done else 0.0
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Uniform minibatch without replacement within the batch."""
        idx = sample_indices_without_replacement(self.size, batch_size, rng)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx], self.dones[idx])
